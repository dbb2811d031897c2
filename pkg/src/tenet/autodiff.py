"""Reverse-mode automatic differentiation over numpy float64 arrays.

The graphs this package needs are small and statically known (dense layers,
pooling, the loss heads), so the engine is a plain tape: every ``Node`` keeps
its forward value plus vector-Jacobian callbacks into its parents, and
``backward`` replays the tape in reverse topological order.  Operands that are
not ``Node`` instances are treated as constants and receive no gradient.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

Array = np.ndarray


def _as_f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "_parents", "grad")

    def __init__(self, value, parents: Sequence[tuple["Node", Callable]] = ()):
        self.value = _as_f64(value)
        self._parents = tuple(parents)
        self.grad: Array | None = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape})"

    # arithmetic sugar; non-Node operands stay constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def leaf(value) -> Node:
    """Create an independent variable (copies the input)."""
    return Node(_as_f64(value).copy())


def value_of(x) -> Array:
    return x.value if isinstance(x, Node) else _as_f64(x)


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum a gradient back down to the shape of a broadcast operand."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(a, b, out_value, vjp_a, vjp_b) -> Node:
    parents = []
    if isinstance(a, Node):
        parents.append((a, vjp_a))
    if isinstance(b, Node):
        parents.append((b, vjp_b))
    return Node(out_value, parents)


def add(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    return _binary(
        a, b, va + vb,
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(g, vb.shape),
    )


def sub(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    return _binary(
        a, b, va - vb,
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(-g, vb.shape),
    )


def mul(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    return _binary(
        a, b, va * vb,
        lambda g: _unbroadcast(g * vb, va.shape),
        lambda g: _unbroadcast(g * va, vb.shape),
    )


def div(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    return _binary(
        a, b, va / vb,
        lambda g: _unbroadcast(g / vb, va.shape),
        lambda g: _unbroadcast(-g * va / (vb * vb), vb.shape),
    )


def matmul(a, b) -> Node:
    """np.matmul semantics, including (batch, n, k) @ (k, m) broadcasting."""
    va, vb = value_of(a), value_of(b)
    out = np.matmul(va, vb)

    def vjp_a(g):
        return _unbroadcast(np.matmul(g, np.swapaxes(vb, -1, -2)), va.shape)

    def vjp_b(g):
        return _unbroadcast(np.matmul(np.swapaxes(va, -1, -2), g), vb.shape)

    return _binary(a, b, out, vjp_a, vjp_b)


def square(a) -> Node:
    va = value_of(a)
    return _binary(a, None, va * va, lambda g: 2.0 * va * g, None)


def tanh(a) -> Node:
    out = np.tanh(value_of(a))
    return _binary(a, None, out, lambda g: g * (1.0 - out * out), None)


def relu(a) -> Node:
    va = value_of(a)
    mask = va > 0.0
    return _binary(a, None, np.where(mask, va, 0.0), lambda g: g * mask, None)


def exp(a) -> Node:
    out = np.exp(value_of(a))
    return _binary(a, None, out, lambda g: g * out, None)


def log(a) -> Node:
    va = value_of(a)
    return _binary(a, None, np.log(va), lambda g: g / va, None)


def sqrt(a) -> Node:
    out = np.sqrt(value_of(a))
    return _binary(a, None, out, lambda g: g * 0.5 / out, None)


def nsum(a, axis=None, keepdims=False) -> Node:
    va = value_of(a)
    out = va.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, va.shape).copy()
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, va.shape).copy()

    return _binary(a, None, out, vjp, None)


def nmean(a, axis=None, keepdims=False) -> Node:
    va = value_of(a)
    if axis is None:
        count = va.size
    else:
        count = va.shape[axis]
    return mul(nsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Node:
    va = value_of(a)
    return _binary(a, None, va.reshape(shape), lambda g: g.reshape(va.shape), None)


def transpose_last(a) -> Node:
    va = value_of(a)
    return _binary(
        a, None, np.swapaxes(va, -1, -2), lambda g: np.swapaxes(g, -1, -2), None
    )


def take(a, index) -> Node:
    """Basic slicing (no integer axis collapse) with scatter-add backward.

    The backward pass recognizes the marker tuple and adds into the parent's
    accumulation buffer directly instead of materializing a full-size zero
    array per slice (the parents here are the big flat parameter leaves).
    """
    if not isinstance(a, Node):
        return Node(_as_f64(a)[index])
    return Node(a.value[index], [(a, ("scatter", index))])


def concat(parts, axis=0) -> Node:
    values = [value_of(p) for p in parts]
    out = np.concatenate(values, axis=axis)
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)
    parents = []
    for i, part in enumerate(parts):
        if not isinstance(part, Node):
            continue
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        sl = tuple(sl)
        parents.append((part, lambda g, sl=sl: g[sl]))
    return Node(out, parents)


def dot(a, b) -> Node:
    """Inner product of two 1-d vectors."""
    va, vb = value_of(a), value_of(b)
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise ShapeError(f"dot expects equal-length vectors, got {va.shape} and {vb.shape}")
    return nsum(mul(a, b))


_NORM_EPS = 1e-30  # keeps cosine finite at the zero vector; negligible otherwise


def l2_normalize_rows(a) -> Node:
    """Scale each row of a 2-d array to unit L2 norm."""
    sq = nsum(square(a), axis=1, keepdims=True)
    return div(a, sqrt(add(sq, _NORM_EPS)))


def cosine_similarity(a, b) -> Node:
    """Cosine similarity of two 1-d vectors."""
    na = sqrt(add(nsum(square(a)), _NORM_EPS))
    nb = sqrt(add(nsum(square(b)), _NORM_EPS))
    return div(dot(a, b), mul(na, nb))


def cosine_matrix(a, b) -> Node:
    """All-pairs cosine similarities between rows of two 2-d arrays."""
    return matmul(l2_normalize_rows(a), transpose_last(l2_normalize_rows(b)))


def logsumexp(a, axis=-1) -> Node:
    """Numerically careful log-sum-exp along one axis.

    The max element is excluded from the exp-sum and folded back through
    log1p, so values that are dominated by a single logit keep full float64
    precision instead of collapsing into ``log(1 + tiny)``.
    """
    va = value_of(a)
    m = np.max(va, axis=axis, keepdims=True)
    shifted = va - m
    e = np.exp(shifted)
    am = np.argmax(va, axis=axis, keepdims=True)
    np.put_along_axis(e, am, 0.0, axis=axis)
    rest = e.sum(axis=axis, keepdims=True)
    lse = m + np.log1p(rest)
    out = np.squeeze(lse, axis=axis)

    def vjp(g):
        soft = np.exp(va - lse)
        return soft * np.expand_dims(g, axis)

    return _binary(a, None, out, vjp, None)


def softmax_cross_entropy(logits, positive: Array) -> Node:
    """Per-row cross-entropy of row softmax against one positive column.

    ``logits`` is (rows, classes); ``positive`` holds one column index per
    row.  Computed as ``(max - logit_pos) + log1p(sum_rest)`` so a dominant
    positive yields the loss to full float64 relative precision.
    """
    x = value_of(logits)
    if x.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects a 2-d logit matrix, got {x.shape}")
    pos = np.asarray(positive, dtype=np.intp)
    rows = np.arange(x.shape[0])
    m = np.max(x, axis=1)
    e = np.exp(x - m[:, None])
    am = np.argmax(x, axis=1)
    e[rows, am] = 0.0
    rest = e.sum(axis=1)
    ce = (m - x[rows, pos]) + np.log1p(rest)

    def vjp(g):
        z = 1.0 + rest  # argmax contributes exactly exp(0)
        soft = np.exp(x - m[:, None]) / z[:, None]
        soft[rows, pos] -= 1.0
        return soft * np.asarray(g).reshape(-1, 1)

    return _binary(logits, None, ce, vjp, None)


def _toposort(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Node) -> None:
    """Populate ``.grad`` on every node reachable from a scalar root."""
    if root.value.size != 1:
        raise ShapeError(f"backward requires a scalar root, got shape {root.value.shape}")
    if not np.all(np.isfinite(root.value)):
        raise NumericError("forward pass produced a non-finite loss")
    order = _toposort(root)
    grads: dict[int, Array] = {id(root): np.ones_like(root.value)}
    owned: set[int] = set()  # buffers safe to mutate in place

    def _accumulate(parent: Node, pg: Array):
        key = id(parent)
        acc = grads.get(key)
        if acc is None:
            grads[key] = pg
        elif key in owned:
            acc += pg
        else:
            grads[key] = acc + pg
            owned.add(key)

    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node.grad = g
        owned.discard(id(node))
        for parent, vjp in node._parents:
            if isinstance(vjp, tuple):  # ("scatter", index) from take()
                index = vjp[1]
                key = id(parent)
                acc = grads.get(key)
                if acc is None:
                    acc = np.zeros_like(parent.value)
                    grads[key] = acc
                    owned.add(key)
                elif key not in owned:
                    acc = acc.copy()
                    grads[key] = acc
                    owned.add(key)
                acc[index] += g
            else:
                _accumulate(parent, vjp(g))


def value_and_grad(fn: Callable[[Node], Node], at: Array) -> tuple[float, Array]:
    """Evaluate a scalar-valued function and its gradient at a flat vector."""
    p = leaf(at)
    out = fn(p)
    if not isinstance(out, Node):
        raise ShapeError("loss function must return a Node")
    backward(out)
    g = p.grad if p.grad is not None else np.zeros_like(p.value)
    if not np.all(np.isfinite(g)):
        raise NumericError("backward pass produced a non-finite gradient")
    return float(out.value.reshape(())), g


def grad(fn: Callable[[Node], Node], at: Array) -> Array:
    """Gradient of a scalar-valued function at a flat parameter vector."""
    return value_and_grad(fn, at)[1]
