"""End-to-end experiment recipes: velocity alignment, task scaling,
paraphrase robustness, and the baseline comparison.

Each recipe generates its own datasets, trains the configured models, and
returns plain-dict tables (also written as JSON + CSV when an output
directory is given).  Training seeds vary per run; dataset and registry seeds
come from the config so every model in a recipe sees identical data.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .config import build_model, build_registry, config_hash
from .data import generate_dataset, split_tasks
from .envs import VELTRACK_HELDOUT_TARGETS, VELTRACK_OOD_TARGET, task_registry
from .errors import ConfigError
from .evaluation import evaluate, paraphrase_eval, velocity_alignment


def _write_table(out_dir: str | Path | None, stem: str, rows: list[dict],
                 payload: dict) -> None:
    if out_dir is None:
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    if rows:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        (out_dir / f"{stem}.csv").write_text(buf.getvalue(), encoding="utf-8")


def _trained_model(config: dict, dataset, seed: int):
    model = build_model(config)
    model.set_params(seed=seed)
    return model.fit(dataset)


def run_velocity_experiment(config: dict, out_dir=None) -> dict:
    """Train on the velocity grid minus the held-out targets, then measure
    achieved speed for each held-out instruction plus the out-of-distribution
    one."""
    registry = task_registry("veltrack")
    train, test = split_tasks(registry)
    dataset = generate_dataset(train, k=config["data"]["k"], m=config["data"]["m"],
                               levels=tuple(config["data"]["levels"]),
                               seed=config["data"]["seed"])
    seed = config["model"]["seed"]
    model = _trained_model(config, dataset, seed)
    targets = [t.params[0] for t in test] + [VELTRACK_OOD_TARGET]
    rows = velocity_alignment(model.policy_source(), targets,
                              n_rollouts=config["eval"]["n_rollouts"], seed=0)
    payload = {"config_hash": config_hash(config), "rows": rows,
               "held_out": list(VELTRACK_HELDOUT_TARGETS), "ood": VELTRACK_OOD_TARGET}
    _write_table(out_dir, "velocity_alignment", rows, payload)
    return payload


def run_scaling_experiment(config: dict, out_dir=None) -> dict:
    """Held-out success as the train-task count grows (pointgoal registries)."""
    sizes = config["experiment"]["sizes"]
    seeds = config["experiment"]["seeds"]
    if sorted(sizes) != list(sizes):
        raise ConfigError("sizes must be ascending")
    if len(set(sizes)) != len(sizes):
        raise ConfigError("duplicate sizes rejected")
    rows = []
    for size in sizes:
        registry = task_registry("pointgoal", count=size, seed=config["registry_seed"])
        train, test = split_tasks(registry, holdout_fraction=0.1,
                                  seed=config["split"]["seed"])
        dataset = generate_dataset(train, k=config["data"]["k"], m=config["data"]["m"],
                                   levels=tuple(config["data"]["levels"]),
                                   seed=config["data"]["seed"])
        per_seed = []
        for seed in seeds:
            model = _trained_model(config, dataset, seed)
            report = evaluate(model.policy_source(), test,
                              n_rollouts=config["eval"]["n_rollouts"], seed=0)
            per_seed.append(report.overall_success)
        rows.append({
            "train_tasks": len(train),
            "total_tasks": size,
            "held_out_tasks": len(test),
            "success_mean": float(np.mean(per_seed)),
            "success_std": float(np.std(per_seed)),
        })
    payload = {"config_hash": config_hash(config), "rows": rows, "seeds": list(seeds)}
    _write_table(out_dir, "task_scaling", rows, payload)
    return payload


def run_paraphrase_experiment(config: dict, out_dir=None, model=None, dataset=None) -> dict:
    """Train on canonical descriptions, evaluate on fresh paraphrase levels."""
    levels = config["experiment"]["levels"]
    seeds = config["experiment"]["seeds"]
    if dataset is None:
        registry = build_registry(config)
        dataset = generate_dataset(registry, k=config["data"]["k"], m=config["data"]["m"],
                                   levels=("L0",), seed=config["data"]["seed"])
    if "L0" not in dataset.levels or len(dataset.levels) != 1:
        raise ConfigError("paraphrase protocol expects a dataset with L0 descriptions only")
    models = [model] if model is not None else [
        _trained_model(config, dataset, seed) for seed in seeds
    ]
    per_level: dict[str, list[float]] = {level: [] for level in levels}
    for m in models:
        results = paraphrase_eval(m, dataset.tasks, levels=levels,
                                  n_rollouts=config["eval"]["n_rollouts"], seed=0)
        for level in levels:
            per_level[level].append(results[level]["success"])
    rows = [{"level": level,
             "success_mean": float(np.mean(per_level[level])),
             "success_std": float(np.std(per_level[level]))}
            for level in levels]
    payload = {"config_hash": config_hash(config), "rows": rows,
               "seeds": list(seeds), "n_models": len(models)}
    _write_table(out_dir, "paraphrase", rows, payload)
    return payload


def run_baselines_experiment(config: dict, out_dir=None) -> dict:
    """Text-conditioned variants against the demonstration-conditioned and
    task-blind baselines on one multi-task registry, plus the wrong-prompt
    conditioning probe."""
    registry = build_registry(config)
    dataset = generate_dataset(registry, k=config["data"]["k"], m=config["data"]["m"],
                               levels=tuple(config["data"]["levels"]),
                               seed=config["data"]["seed"])
    seeds = config["experiment"]["seeds"]
    n_rollouts = config["eval"]["n_rollouts"]
    prompts = {t.task_id: dataset.per_task[t.task_id].trajectories[0] for t in registry}
    shifted = {registry[i].task_id:
               dataset.per_task[registry[(i + 1) % len(registry)].task_id].trajectories[0]
               for i in range(len(registry))}

    def eval_mean(make_source, model_config):
        scores = []
        for seed in seeds:
            model = _trained_model(model_config, dataset, seed)
            report = evaluate(make_source(model), registry, n_rollouts=n_rollouts, seed=0)
            scores.append(report.overall_success)
        return float(np.mean(scores)), float(np.std(scores))

    def variant_config(**model_overrides):
        cfg = json.loads(json.dumps(config))
        cfg["model"].update(model_overrides)
        return cfg

    rows = []
    for name, cfg, source in (
        ("tenet-direct", variant_config(kind="tenet", variant="direct"),
         lambda m: m.policy_source()),
        ("tenet-contrast", variant_config(kind="tenet", variant="contrastive"),
         lambda m: m.policy_source()),
        ("traj-hn", variant_config(kind="traj-hn"),
         lambda m: m.policy_source(prompts)),
        ("prompt-concat", variant_config(kind="prompt-concat"),
         lambda m: m.policy_source(prompts)),
        ("bc-shared", variant_config(kind="bc-shared"),
         lambda m: m.policy_source()),
    ):
        mean, std = eval_mean(source, cfg)
        rows.append({"model": name, "success_mean": mean, "success_std": std})

    # conditioning-sensitivity probe: a prompt from the wrong task should
    # collapse the demonstration-conditioned baseline
    probe_model = build_model(variant_config(kind="traj-hn"))
    probe_model.set_params(seed=seeds[0])
    probe_model.fit(dataset)
    wrong = evaluate(probe_model.policy_source(shifted), registry,
                     n_rollouts=n_rollouts, seed=0)
    rows.append({"model": "traj-hn-wrong-prompt",
                 "success_mean": wrong.overall_success, "success_std": 0.0})
    payload = {"config_hash": config_hash(config), "rows": rows, "seeds": list(seeds)}
    _write_table(out_dir, "baselines", rows, payload)
    return payload


EXPERIMENTS = {
    "velocity": run_velocity_experiment,
    "scaling": run_scaling_experiment,
    "paraphrase": run_paraphrase_experiment,
    "baselines": run_baselines_experiment,
}


def run_experiment(name: str, config: dict, out_dir=None) -> dict:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name](config, out_dir)
