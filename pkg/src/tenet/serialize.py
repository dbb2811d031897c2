"""Binary artifact formats: model checkpoints and standalone controller files.

Both formats are a magic tag, a version, a JSON header, and raw little-endian
float64 parameter blocks; loading is bit-exact.  A controller file carries its
own layer manifest, so a deployed controller needs no model code beyond the
forward pass.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArtifactError
from .nets import Manifest, ParamVec
from .optim import Adam

_CKPT_MAGIC = b"TNETCKPT"
_CTRL_MAGIC = b"TNETCTRL"
FORMAT_VERSION = 1


def _provider_descriptor(provider) -> dict:
    desc = {"kind": provider.source, "dim": provider.dim}
    if getattr(provider, "path", None) is not None:
        desc["path"] = str(provider.path)
    return desc


def provider_from_descriptor(desc: dict):
    from .text import HashEmbedder, load_embedding_table

    if desc["kind"] == "hash":
        return HashEmbedder(int(desc["dim"]))
    if desc["kind"] == "table":
        path = desc.get("path")
        if not path or not Path(path).exists():
            raise ArtifactError(
                f"checkpoint references an embedding table at {path!r} that is not present"
            )
        return load_embedding_table(path)
    raise ArtifactError(f"unknown provider kind {desc['kind']!r}")


def _json_safe(value):
    if isinstance(value, tuple):
        return [_json_safe(v) for v in value]
    if isinstance(value, (list, dict, str, int, float, bool)) or value is None:
        return value
    raise ArtifactError(f"cannot serialize config value of type {type(value).__name__}")


def _pack(magic: bytes, header: dict, blocks: list[tuple[str, np.ndarray]]) -> bytes:
    index = []
    offset = 0
    payload = []
    for name, arr in blocks:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "offset": offset, "length": arr.size})
        payload.append(data)
        offset += len(data)
    header = dict(header)
    header["blocks"] = index
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return b"".join([
        magic,
        struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)),
        header_bytes,
        *payload,
    ])


def _unpack(magic: bytes, blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if blob[:8] != magic:
        raise ArtifactError(f"bad file magic; expected {magic!r}")
    version, header_len = struct.unpack_from("<IQ", blob, 8)
    if version != FORMAT_VERSION:
        raise ArtifactError(f"unsupported format version {version}")
    start = 8 + 12
    header = json.loads(blob[start: start + header_len].decode("utf-8"))
    base = start + header_len
    blocks = {}
    for entry in header["blocks"]:
        begin = base + entry["offset"]
        blocks[entry["name"]] = np.frombuffer(
            blob[begin: begin + entry["length"] * 8], dtype="<f8"
        ).astype(np.float64)
    return header, blocks


# ------------------------------------------------------------------ checkpoints

_KINDS = {}


def _register_kinds():
    if _KINDS:
        return
    from .baselines import PromptConcatPolicy, SharedPolicyBC, TrajectoryHypernet
    from .models import TeNet

    _KINDS.update({
        "tenet": TeNet,
        "bc-shared": SharedPolicyBC,
        "traj-hn": TrajectoryHypernet,
        "prompt-concat": PromptConcatPolicy,
    })


def _kind_of(model) -> str:
    _register_kinds()
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise ArtifactError(f"cannot checkpoint a {type(model).__name__}")


def _manifest_attrs(model) -> dict:
    out = {}
    for attr in dir(model):
        if attr.endswith("manifest_") and not attr.startswith("__"):
            out[attr] = getattr(model, attr).to_json()
    return out


_SIMPLE_STATE = ("family_", "state_dim_", "action_dim_", "feature_dim_",
                 "task_ids_", "n_steps_done_", "final_loss_", "loss_history_")


def save_checkpoint(model, path: str | Path, config_hash: str = "",
                    registry_fingerprint: str = "",
                    include_optimizer: bool = True) -> Path:
    """Write a fitted estimator to a versioned binary checkpoint."""
    path = Path(path)
    if not hasattr(model, "w_"):
        raise ArtifactError("cannot checkpoint an unfitted model")
    init_params = {k: _json_safe(v) for k, v in model.get_params().items()
                   if k != "provider"}
    meta = {
        "manifests": _manifest_attrs(model),
        "slices": {k: [v.start, v.stop] for k, v in getattr(model, "_slices", {}).items()},
        "state": {k: getattr(model, k) for k in _SIMPLE_STATE if hasattr(model, k)},
        "config_hash": config_hash,
        "registry_fingerprint": registry_fingerprint,
    }
    if hasattr(model, "provider_"):
        meta["provider"] = _provider_descriptor(model.provider_)
    blocks = [("w", model.w_)]
    if include_optimizer and hasattr(model, "adam_"):
        meta["optimizer"] = model.adam_.state_dict()
        blocks += [("adam_m", model.adam_.m), ("adam_v", model.adam_.v)]
    header = {"kind": _kind_of(model), "init_params": init_params, "meta": meta}
    path.write_bytes(_pack(_CKPT_MAGIC, header, blocks))
    return path


def load_model(path: str | Path):
    """Reconstruct a fitted estimator from a checkpoint file."""
    _register_kinds()
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"no checkpoint at {path}; run `tenet train` first")
    header, blocks = _unpack(_CKPT_MAGIC, path.read_bytes())
    cls = _KINDS.get(header["kind"])
    if cls is None:
        raise ArtifactError(f"unknown checkpoint kind {header['kind']!r}")
    init_params = {
        k: tuple(v) if isinstance(v, list) else v
        for k, v in header["init_params"].items()
    }
    model = cls(**init_params)
    meta = header["meta"]
    for attr, manifest_json in meta["manifests"].items():
        setattr(model, attr, Manifest.from_json(manifest_json))
    if meta["slices"]:
        model._slices = {k: slice(a, b) for k, (a, b) in meta["slices"].items()}
    for key, value in meta["state"].items():
        setattr(model, key, value)
    model.config_hash_ = meta.get("config_hash", "")
    model.registry_fingerprint_ = meta.get("registry_fingerprint", "")
    if "provider" in meta:
        model.provider_ = provider_from_descriptor(meta["provider"])
    model.w_ = blocks["w"].copy()
    if "optimizer" in meta and "adam_m" in blocks:
        model.adam_ = Adam.restore(meta["optimizer"], blocks["adam_m"], blocks["adam_v"])
    if hasattr(model, "_n_trainable"):
        del model._n_trainable
    return model


# ------------------------------------------------------------- controller files

def save_controller(params: ParamVec, path: str | Path, meta: dict | None = None) -> Path:
    """Write one generated controller to a standalone file."""
    path = Path(path)
    header = {
        "manifest": params.manifest.to_json(),
        "param_count": params.manifest.param_count,
        "meta": meta or {},
    }
    path.write_bytes(_pack(_CTRL_MAGIC, header, [("params", params.values)]))
    return path


def load_controller(path: str | Path) -> tuple[ParamVec, dict]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"no controller file at {path}; run `tenet instantiate` first")
    header, blocks = _unpack(_CTRL_MAGIC, path.read_bytes())
    manifest = Manifest.from_json(header["manifest"])
    return ParamVec(blocks["params"].copy(), manifest), header.get("meta", {})
