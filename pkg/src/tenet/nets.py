"""Dense-network building blocks: layer manifests, flat parameter vectors,
weight initialization, and forward passes (a fast numpy path for rollouts and
benchmarking, plus differentiable paths through the autodiff tape).

A network's parameters always live in one flat float64 vector laid out layer
by layer as ``[W row-major, b]``; the manifest records the layer geometry and
activation tags needed to interpret it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import InputError, ShapeError

ACTIVATIONS = ("tanh", "relu", "linear")

_ACT_FNS = {
    "tanh": np.tanh,
    "relu": lambda x: np.maximum(x, 0.0),
    "linear": lambda x: x,
}

_ACT_NODES = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "linear": lambda x: x,
}


@dataclass(frozen=True)
class LayerSpec:
    name: str
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InputError(f"layer {self.name!r}: unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"layer {self.name!r}: dims must be positive")

    @property
    def param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


@dataclass(frozen=True)
class Manifest:
    """Ordered layer geometry of one dense network."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("manifest needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if prev.out_dim != cur.in_dim:
                raise ShapeError(
                    f"layer {cur.name!r} expects {cur.in_dim} inputs but "
                    f"{prev.name!r} produces {prev.out_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def param_count(self) -> int:
        return sum(l.param_count for l in self.layers)

    def slots(self) -> Iterable[tuple[LayerSpec, slice, slice]]:
        """Yield (layer, weight slice, bias slice) into the flat vector."""
        offset = 0
        for layer in self.layers:
            w_end = offset + layer.in_dim * layer.out_dim
            b_end = w_end + layer.out_dim
            yield layer, slice(offset, w_end), slice(w_end, b_end)
            offset = b_end

    def to_json(self) -> list[list]:
        return [[l.name, l.in_dim, l.out_dim, l.activation] for l in self.layers]

    @classmethod
    def from_json(cls, data: Sequence[Sequence]) -> "Manifest":
        return cls(tuple(LayerSpec(str(n), int(i), int(o), str(a)) for n, i, o, a in data))


def mlp_manifest(name: str, in_dim: int, hidden: Sequence[int], out_dim: int,
                 hidden_activation: str = "relu", out_activation: str = "linear") -> Manifest:
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        act = out_activation if last else hidden_activation
        layers.append(LayerSpec(f"{name}_{'out' if last else f'h{i}'}", d_in, d_out, act))
    return Manifest(tuple(layers))


def policy_manifest(state_dim: int, action_dim: int, hidden: Sequence[int] = (64, 64)) -> Manifest:
    """Controller network: tanh hidden layers, tanh output onto [-1, 1] actions."""
    return mlp_manifest("policy", state_dim, hidden, action_dim,
                        hidden_activation="tanh", out_activation="tanh")


@dataclass
class ParamVec:
    """Flat parameter vector plus the manifest that interprets it."""

    values: np.ndarray
    manifest: Manifest

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.values.ndim != 1:
            raise ShapeError("parameter vector must be flat")
        if self.values.shape[0] != self.manifest.param_count:
            raise ShapeError(
                f"parameter vector has {self.values.shape[0]} entries, "
                f"manifest needs {self.manifest.param_count}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("parameter vector contains non-finite values")

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray, str]]:
        """Per-layer (weight matrix, bias, activation tag) views."""
        out = []
        for layer, w_sl, b_sl in self.manifest.slots():
            w = self.values[w_sl].reshape(layer.in_dim, layer.out_dim)
            out.append((w, self.values[b_sl], layer.activation))
        return out


def init_params(manifest: Manifest, rng: np.random.Generator,
                last_layer_scale: float = 1.0) -> np.ndarray:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.

    ``last_layer_scale`` shrinks the final layer's weights; used so freshly
    generated controllers start as near-zero functions.
    """
    values = np.zeros(manifest.param_count, dtype=np.float64)
    n_layers = len(manifest.layers)
    for i, (layer, w_sl, _) in enumerate(manifest.slots()):
        lim = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
        if i == n_layers - 1:
            lim *= last_layer_scale
        values[w_sl] = rng.uniform(-lim, lim, size=layer.in_dim * layer.out_dim)
    return values


def mlp_forward(params: ParamVec, x: np.ndarray) -> np.ndarray:
    """Pure forward pass; accepts a single input vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    expect = params.manifest.in_dim
    if x.shape[-1] != expect:
        raise ShapeError(
            f"layer {params.manifest.layers[0].name!r} expects {expect} inputs, got {x.shape[-1]}"
        )
    out = x
    for w, b, act in params.unpack():
        out = _ACT_FNS[act](out @ w + b)
    return out


def mlp_apply(flat: "ad.Node", manifest: Manifest, x) -> "ad.Node":
    """Differentiable forward pass with weights sliced from a flat Node.

    ``x`` may be a constant array or a Node; leading batch axes broadcast.
    """
    out = x
    for layer, w_sl, b_sl in manifest.slots():
        w = ad.reshape(ad.take(flat, (w_sl,)), (layer.in_dim, layer.out_dim))
        b = ad.take(flat, (b_sl,))
        out = _ACT_NODES[layer.activation](ad.add(ad.matmul(out, w), b))
    return out


def generated_apply(theta: "ad.Node", manifest: Manifest, x: np.ndarray) -> "ad.Node":
    """Apply per-item generated networks to per-item inputs.

    ``theta`` is (batch, param_count): one flat parameter vector per item.
    ``x`` is (batch, n, in_dim); item ``i`` is evaluated under parameters
    ``theta[i]``.  Differentiable in ``theta``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[-1] != manifest.in_dim:
        raise ShapeError(f"expected inputs (batch, n, {manifest.in_dim}), got {x.shape}")
    batch = x.shape[0]
    out = x
    for layer, w_sl, b_sl in manifest.slots():
        w = ad.reshape(ad.take(theta, (slice(None), w_sl)),
                       (batch, layer.in_dim, layer.out_dim))
        b = ad.reshape(ad.take(theta, (slice(None), b_sl)), (batch, 1, layer.out_dim))
        out = _ACT_NODES[layer.activation](ad.add(ad.matmul(out, w), b))
    return out


def pooled_apply(flat: "ad.Node", manifest: Manifest, pool_after: int, x) -> "ad.Node":
    """Differentiable per-row MLP, mean-pool over the time axis, head MLP.

    ``x`` is (batch, time, features); layers ``[:pool_after]`` run per row,
    the time axis is mean-pooled, and the remaining layers map the pooled
    vector down.  Permutation-invariant over the time axis by construction.
    """
    layers = list(manifest.slots())
    out = x
    for layer, w_sl, b_sl in layers[:pool_after]:
        w = ad.reshape(ad.take(flat, (w_sl,)), (layer.in_dim, layer.out_dim))
        b = ad.take(flat, (b_sl,))
        out = _ACT_NODES[layer.activation](ad.add(ad.matmul(out, w), b))
    out = ad.nmean(out, axis=-2)
    for layer, w_sl, b_sl in layers[pool_after:]:
        w = ad.reshape(ad.take(flat, (w_sl,)), (layer.in_dim, layer.out_dim))
        b = ad.take(flat, (b_sl,))
        out = _ACT_NODES[layer.activation](ad.add(ad.matmul(out, w), b))
    return out


def pooled_forward(params: ParamVec, pool_after: int, rows: np.ndarray) -> np.ndarray:
    """Pure-numpy counterpart of ``pooled_apply`` for one (time, features) input."""
    layers = params.unpack()
    out = np.asarray(rows, dtype=np.float64)
    for w, b, act in layers[:pool_after]:
        out = _ACT_FNS[act](out @ w + b)
    out = out.mean(axis=-2)
    for w, b, act in layers[pool_after:]:
        out = _ACT_FNS[act](out @ w + b)
    return out


class CompiledPolicy:
    """A generated controller unpacked for fast repeated single-state calls."""

    def __init__(self, params: ParamVec, precision: str = "f64"):
        if precision not in ("f64", "f32"):
            raise InputError(f"unknown precision {precision!r}")
        dtype = np.float64 if precision == "f64" else np.float32
        self.precision = precision
        self.manifest = params.manifest
        self.layers = [(w.astype(dtype), b.astype(dtype), act) for w, b, act in params.unpack()]
        self._dtype = dtype

    @property
    def param_count(self) -> int:
        return self.manifest.param_count

    def __call__(self, state: np.ndarray) -> np.ndarray:
        out = np.asarray(state, dtype=self._dtype)
        for w, b, act in self.layers:
            out = _ACT_FNS[act](out @ w + b)
        return out
