"""Adam optimizer over flat float64 parameter vectors.

The update is memory-bound on the big flat vectors this package trains, so a
fused single-pass kernel (numba, when importable) backs the same arithmetic
as the plain numpy path; both produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, ShapeError

try:
    from numba import njit

    @njit(cache=True)
    def _fused_step(out, params, grad, m, v, beta1, beta2, bc1, bc2, lr, eps):
        c1 = 1.0 - beta1
        c2 = 1.0 - beta2
        for i in range(params.shape[0]):
            m[i] = beta1 * m[i] + c1 * grad[i]
            v[i] = beta2 * v[i] + c2 * (grad[i] * grad[i])
            denom = np.sqrt(v[i] / bc2) + eps
            out[i] = params[i] - (m[i] / denom) * (lr / bc1)

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


class Adam:
    """Standard Adam with bias correction.

    Moments live in the optimizer; ``step`` returns the updated parameter
    vector so callers can keep parameters immutable if they like.
    """

    def __init__(self, n_params: int, lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise InputError("learning rate must be positive")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = np.zeros(n_params, dtype=np.float64)
        self.v = np.zeros(n_params, dtype=np.float64)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if params.shape != self.m.shape or grad.shape != self.m.shape:
            raise ShapeError(
                f"adam state holds {self.m.shape[0]} params, "
                f"got params {params.shape} and grad {grad.shape}"
            )
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        if _HAVE_NUMBA:
            out = np.empty_like(params)
            _fused_step(out, params, grad, self.m, self.v,
                        self.beta1, self.beta2, bc1, bc2, self.lr, self.eps)
            return out
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grad * grad)
        denom = np.sqrt(self.v / bc2)
        denom += self.eps
        update = self.m / denom
        update *= self.lr / bc1
        return params - update

    def state_dict(self) -> dict:
        return {"t": self.t, "lr": self.lr, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps}

    @classmethod
    def restore(cls, state: dict, m: np.ndarray, v: np.ndarray) -> "Adam":
        opt = cls(m.shape[0], lr=state["lr"], beta1=state["beta1"],
                  beta2=state["beta2"], eps=state["eps"])
        opt.t = int(state["t"])
        opt.m = np.asarray(m, dtype=np.float64).copy()
        opt.v = np.asarray(v, dtype=np.float64).copy()
        return opt
