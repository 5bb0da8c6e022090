"""Dense float64 layer operations with hand-written backward rules, plus Adam.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The
networks in this package are small static MLPs, so every layer has an
explicit forward/backward pair instead of a general autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DegenerateRowError, DimensionError, NumericalError

NORM_FLOOR = 1e-12


def as_matrix(x, name="x") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass
class ParamTensor:
    """A trainable array together with its gradient and Adam moments."""

    value: np.ndarray
    grad: np.ndarray = field(default=None)
    adam_m: np.ndarray = field(default=None)
    adam_v: np.ndarray = field(default=None)
    step: int = 0

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        for name in ("grad", "adam_m", "adam_v"):
            arr = getattr(self, name)
            if arr is None:
                setattr(self, name, np.zeros_like(self.value))
            else:
                arr = np.array(arr, dtype=np.float64)
                if arr.shape != self.value.shape:
                    raise DimensionError(
                        f"{name} shape {arr.shape} != value shape {self.value.shape}"
                    )
                setattr(self, name, arr)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0.0)

    def copy(self) -> "ParamTensor":
        return ParamTensor(
            self.value.copy(), self.grad.copy(), self.adam_m.copy(),
            self.adam_v.copy(), self.step,
        )


def adam_step(p: ParamTensor, h: AdamHyper) -> ParamTensor:
    """Apply one bias-corrected Adam update in place and clear the gradient."""
    if not np.all(np.isfinite(p.grad)):
        raise NumericalError(f"non-finite gradient at Adam step {p.step + 1}")
    p.step += 1
    p.adam_m *= h.beta1
    p.adam_m += (1.0 - h.beta1) * p.grad
    p.adam_v *= h.beta2
    p.adam_v += (1.0 - h.beta2) * p.grad * p.grad
    m_hat = p.adam_m / (1.0 - h.beta1 ** p.step)
    v_hat = p.adam_v / (1.0 - h.beta2 ** p.step)
    p.value -= h.lr * m_hat / (np.sqrt(v_hat) + h.eps)
    p.zero_grad()
    return p


# --------------------------------------------------------------------------
# layer rules


def linear_forward(x, W, b) -> np.ndarray:
    x = as_matrix(x)
    W = as_matrix(W, "W")
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.shape[1] != W.shape[0]:
        raise DimensionError(f"x has {x.shape[1]} columns but W has {W.shape[0]} rows")
    if b.shape[0] != W.shape[1]:
        raise DimensionError(f"bias length {b.shape[0]} != output width {W.shape[1]}")
    return x @ W + b


def linear_backward(x, W, dy):
    """Return ``(dx, dW, db)`` for ``y = x @ W + b``."""
    x = as_matrix(x)
    W = as_matrix(W, "W")
    dy = as_matrix(dy, "dy")
    if dy.shape != (x.shape[0], W.shape[1]) or x.shape[1] != W.shape[0]:
        raise DimensionError(
            f"backward shapes x{x.shape} W{W.shape} dy{dy.shape} do not conform"
        )
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, dy) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, dy, 0.0)


def l2_normalize_rows(z):
    """Scale every row to unit Euclidean norm.

    Returns ``(u, norms)``; keep ``norms`` for :func:`l2_normalize_rows_backward`.
    """
    z = as_matrix(z, "z")
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    if z.shape[0] and np.min(norms) < NORM_FLOOR:
        bad = int(np.argmin(norms))
        raise DegenerateRowError(f"row {bad} has norm {norms[bad]:.3g} < {NORM_FLOOR}")
    return z / norms[:, None], norms


def l2_normalize_rows_backward(u, norms, du) -> np.ndarray:
    # d(z/|z|) = (I - u u^T) / |z|
    du = as_matrix(du, "du")
    proj = np.einsum("ij,ij->i", u, du)
    return (du - u * proj[:, None]) / norms[:, None]


# --------------------------------------------------------------------------
# dense layers and small MLPs


@dataclass
class Dense:
    W: ParamTensor
    b: ParamTensor

    @property
    def fan_in(self):
        return self.W.shape[0]

    @property
    def fan_out(self):
        return self.W.shape[1]

    def params(self):
        return [self.W, self.b]

    def copy(self) -> "Dense":
        return Dense(self.W.copy(), self.b.copy())


def glorot_dense(fan_in: int, fan_out: int, rng: np.random.Generator) -> Dense:
    """Uniform Glorot weights in +-sqrt(6/(fan_in+fan_out)), zero bias."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return Dense(ParamTensor(W), ParamTensor(np.zeros(fan_out)))


def build_mlp(widths, rng: np.random.Generator) -> list[Dense]:
    widths = list(widths)
    if any(int(w) < 1 for w in widths):
        raise ValueError(f"layer widths must be >= 1, got {widths}")
    return [glorot_dense(int(a), int(b), rng) for a, b in zip(widths[:-1], widths[1:])]


def mlp_forward(layers: list[Dense], x):
    """Linear layers with ReLU between them (none after the last).

    Returns ``(out, cache)``; the cache holds every layer input and
    pre-activation needed by :func:`mlp_backward`.
    """
    h = as_matrix(x)
    inputs, pre = [], []
    for k, layer in enumerate(layers):
        inputs.append(h)
        a = linear_forward(h, layer.W.value, layer.b.value)
        pre.append(a)
        h = relu(a) if k < len(layers) - 1 else a
    return h, (inputs, pre)


def mlp_backward(layers: list[Dense], cache, dout) -> np.ndarray:
    """Accumulate parameter gradients into ``layers`` and return d(input)."""
    inputs, pre = cache
    d = as_matrix(dout, "dout")
    for k in range(len(layers) - 1, -1, -1):
        if k < len(layers) - 1:
            d = relu_backward(pre[k], d)
        layer = layers[k]
        d, dW, db = linear_backward(inputs[k], layer.W.value, d)
        layer.W.grad += dW
        layer.b.grad += db
    return d


def mlp_params(layers: list[Dense]) -> list[ParamTensor]:
    return [p for layer in layers for p in layer.params()]


# --------------------------------------------------------------------------
# finite-difference oracle


def grad_check(
    f: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x,
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Max elementwise relative error between an analytic and a numeric gradient.

    ``f`` maps an array to ``(value, analytic_gradient)``. The numeric
    gradient uses central differences with step ``eps``; the relative error
    of each entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    x = np.array(x, dtype=np.float64)
    _, analytic = f(x.copy())
    analytic = np.asarray(analytic, dtype=np.float64).reshape(x.shape)
    numeric = np.zeros_like(x)
    flat = x.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x.copy())[0]
        flat[i] = old - eps
        fm = f(x.copy())[0]
        flat[i] = old
        nflat[i] = (fp - fm) / (2.0 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0


def check_finite(x, what: str):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values in {what}")
