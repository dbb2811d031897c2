"""Run configuration: one JSON document, schema-validated, hashable.

CLI flags override file values; the merged effective config is written next
to every output so artifacts are reproducible from what sits beside them.
"""

from __future__ import annotations

import copy
import hashlib
import inspect
import json
from pathlib import Path

import jsonschema

from .envs import task_registry
from .errors import ConfigError

DEFAULT_CONFIG = {
    "family": "switchworld10",
    "task_count": 50,
    "registry_seed": 0,
    "split": {"holdout_fraction": None, "seed": 0},
    "data": {"k": 20, "m": 10, "levels": ["L0"], "seed": 0},
    "model": {
        "kind": "tenet",
        "variant": "contrastive",
        "text_dim": 256,
        "cond_dim": 64,
        "proj_hidden": [128],
        "hyper_hidden": [256, 256],
        "policy_hidden": [64, 64],
        "traj_hidden": 64,
        "temperature": 0.1,
        "grounding_weight": 1.0,
        "learning_rate": 3e-4,
        "steps": 20000,
        "batch_tasks": 32,
        "bc_samples": 16,
        "batch_size": 128,
        "paraphrase_positive": False,
        "seed": 0,
        "log_every": 100,
    },
    "provider": {"kind": "hash", "path": None},
    "eval": {"n_rollouts": 50, "seeds": [0, 1, 2], "level": "L0"},
    "train_on": "train",
    "experiment": {
        "sizes": [25, 50, 100, 200],
        "seeds": [0, 1, 2],
        "levels": ["L0", "L1", "L2"],
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "family": {"enum": ["veltrack", "switchworld10", "switchworld50", "pointgoal"]},
        "task_count": {"type": "integer", "minimum": 1},
        "registry_seed": {"type": "integer"},
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "holdout_fraction": {"type": ["number", "null"],
                                     "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "levels": {"type": "array", "items": {"enum": ["L0", "L1", "L2"]},
                           "minItems": 1},
                "seed": {"type": "integer"},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["tenet", "bc-shared", "traj-hn", "prompt-concat"]},
                "variant": {"enum": ["direct", "mse", "contrastive"]},
                "text_dim": {"type": "integer", "minimum": 17},
                "cond_dim": {"type": "integer", "minimum": 1},
                "proj_hidden": {"type": "array", "items": {"type": "integer"}},
                "hyper_hidden": {"type": "array", "items": {"type": "integer"}},
                "policy_hidden": {"type": "array", "items": {"type": "integer"}},
                "traj_hidden": {"type": "integer", "minimum": 1},
                "temperature": {"type": "number", "exclusiveMinimum": 0},
                "grounding_weight": {"type": "number", "minimum": 0},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 0},
                "batch_tasks": {"type": "integer", "minimum": 1},
                "bc_samples": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "paraphrase_positive": {"type": "boolean"},
                "seed": {"type": "integer"},
                "log_every": {"type": "integer", "minimum": 1},
            },
        },
        "provider": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["hash", "table"]},
                "path": {"type": ["string", "null"]},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_rollouts": {"type": "integer", "minimum": 1},
                "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "level": {"enum": ["L0", "L1", "L2"]},
            },
        },
        "train_on": {"enum": ["train", "all"]},
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "levels": {"type": "array", "items": {"enum": ["L0", "L1", "L2"]}},
            },
        },
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(config: dict) -> dict:
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config at {'/'.join(map(str, exc.path))}: {exc.message}")
    return config


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- file <- overrides, then validate."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        validate_config(file_cfg)
        config = _deep_merge(config, file_cfg)
    if overrides:
        config = _deep_merge(config, overrides)
    return validate_config(config)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def write_effective_config(config: dict, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.json").write_text(canonical_json(config), encoding="utf-8")


def build_registry(config: dict):
    family = config["family"]
    count = config["task_count"] if family == "pointgoal" else None
    return task_registry(family, count=count, seed=config["registry_seed"])


def build_provider(config: dict):
    from .text import HashEmbedder, load_embedding_table

    spec = config["provider"]
    if spec["kind"] == "hash":
        return HashEmbedder(config["model"]["text_dim"])
    if not spec.get("path"):
        raise ConfigError("table provider needs provider.path")
    provider = load_embedding_table(spec["path"])
    provider.path = spec["path"]
    return provider


def _filtered_kwargs(cls, section: dict) -> dict:
    accepted = set(inspect.signature(cls.__init__).parameters) - {"self"}
    kwargs = {k: v for k, v in section.items() if k in accepted}
    for key in ("proj_hidden", "hyper_hidden", "policy_hidden", "hidden"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    return kwargs


def build_model(config: dict):
    from .baselines import BASELINE_KINDS
    from .models import TeNet

    section = config["model"]
    kind = section["kind"]
    if kind == "tenet":
        model = TeNet(**_filtered_kwargs(TeNet, section))
        if config["provider"]["kind"] != "hash":
            model.set_params(provider=build_provider(config))
        return model
    cls = BASELINE_KINDS[kind]
    return cls(**_filtered_kwargs(cls, section))
