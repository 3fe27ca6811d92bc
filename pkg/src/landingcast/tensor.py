"""Dense float tensors with reverse-mode automatic differentiation.

Arrays are numpy-backed; every differentiable op appends a node with its
backward rule to the active tape, so execution order doubles as the
topological order and one reverse sweep computes all gradients. Training
runs in float32; gradient-check tests switch the default dtype to float64
via `using_dtype`.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np
from scipy import special as _sp

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "DegenerateRowError",
    "record",
    "active_tape",
    "using_dtype",
    "set_default_dtype",
    "get_default_dtype",
    "matmul",
    "softmax_rows",
    "gelu",
    "softplus",
    "layer_norm",
    "take_rows",
    "slice_axis",
]


class ShapeError(ValueError):
    """Operand shapes do not satisfy an op's contract."""


class DegenerateRowError(ValueError):
    """A softmax row has no finite entry left to normalize."""


_DEFAULT_DTYPE = np.dtype(np.float32)

# When true, every op output is checked for NaN (slow; enabled by tests).
check_nan = False


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dt}, want float32 or float64")
    _DEFAULT_DTYPE = dt


def get_default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


@contextmanager
def using_dtype(dtype) -> Iterator[None]:
    """Temporarily switch the dtype new tensors are created with."""
    old = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


class Tensor:
    """A dense n-d float array, optionally tracked for gradients.

    `data` is row-major; `grad` (same shape) is populated by `Tape.backward`
    for leaf tensors with `requires_grad=True` and accumulates across calls
    until `zero_grad`.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else _DEFAULT_DTYPE)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        if check_nan and np.isnan(arr).any():
            raise FloatingPointError("tensor created with NaN entries")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _non_scalar(self)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # arithmetic (broadcasting, scalar-friendly)
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def swapaxes(self, a: int, b: int):
        return swapaxes(self, a, b)


def _non_scalar(t: Tensor):
    raise ValueError(f"expected a scalar tensor, got shape {t.shape}")


TensorLike = Union[Tensor, float, int, np.ndarray]


def _as_tensor(x: TensorLike, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else _DEFAULT_DTYPE))


class TapeNode:
    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output: Tensor, inputs: tuple, backward_fn: Callable):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of differentiable ops; parents always precede children."""

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self._produced: set[int] = set()

    def __len__(self) -> int:
        return len(self.nodes)

    def clear(self) -> None:
        self.nodes.clear()
        self._produced.clear()

    def _record(self, out: Tensor, inputs: tuple, backward_fn: Callable) -> None:
        self.nodes.append(TapeNode(out, inputs, backward_fn))
        self._produced.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into each requiring leaf's `.grad`.

        Visits every recorded node exactly once, in reverse execution order.
        Repeated calls keep accumulating into leaf grads.
        """
        if loss.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for t, gi in zip(node.inputs, node.backward_fn(g)):
                if gi is None:
                    continue
                if id(t) in self._produced:
                    acc = grads.get(id(t))
                    grads[id(t)] = gi if acc is None else acc + gi
                elif t.requires_grad:
                    if t.grad is None:
                        t.grad = np.zeros_like(t.data)
                    t.grad += gi


_tape_stack: list[Tape] = []


def active_tape() -> Optional[Tape]:
    return _tape_stack[-1] if _tape_stack else None


@contextmanager
def record(tape: Optional[Tape] = None) -> Iterator[Tape]:
    """Activate a tape; ops involving grad-requiring tensors get recorded."""
    t = tape if tape is not None else Tape()
    _tape_stack.append(t)
    try:
        yield t
    finally:
        _tape_stack.pop()


def _maybe_record(out: Tensor, inputs: tuple, backward_fn: Callable) -> Tensor:
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape._record(out, inputs, backward_fn)
    if check_nan and np.isnan(out.data).any():
        raise FloatingPointError("op produced NaN")
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / arithmetic ops
# ---------------------------------------------------------------------------

def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _maybe_record(out, (a, b), bwd)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _maybe_record(out, (a, b), bwd)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    out = Tensor(ad * bd)

    def bwd(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _maybe_record(out, (a, b), bwd)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    out = Tensor(ad / bd)

    def bwd(g):
        ga = _unbroadcast(g / bd, a.shape)
        gb = _unbroadcast(-g * ad / (bd * bd), b.shape)
        return ga, gb

    return _maybe_record(out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _maybe_record(out, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    ad = a.data
    out = Tensor(ad**p)

    def bwd(g):
        return (g * p * ad ** (p - 1.0),)

    return _maybe_record(out, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    od = np.exp(a.data)
    out = Tensor(od)
    return _maybe_record(out, (a,), lambda g: (g * od,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    out = Tensor(np.log(ad))
    return _maybe_record(out, (a,), lambda g: (g / ad,))


def sqrt(a: Tensor) -> Tensor:
    od = np.sqrt(a.data)
    out = Tensor(od)
    return _maybe_record(out, (a,), lambda g: (g / (2.0 * od),))


def gelu(a: Tensor) -> Tensor:
    """Exact-Phi GELU: x * Phi(x) with the Gaussian CDF."""
    ad = a.data
    phi_cdf = _sp.ndtr(ad)
    out = Tensor(ad * phi_cdf)

    def bwd(g):
        pdf = np.exp(-0.5 * ad * ad) * (1.0 / math.sqrt(2.0 * math.pi))
        return (g * (phi_cdf + ad * pdf),)

    return _maybe_record(out, (a,), bwd)


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), computed stably; derivative is sigmoid(x)."""
    ad = a.data
    out = Tensor(np.logaddexp(np.zeros((), dtype=ad.dtype), ad))

    def bwd(g):
        return (g * _sp.expit(ad),)

    return _maybe_record(out, (a,), bwd)


# ---------------------------------------------------------------------------
# matmul and shape ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the trailing two axes, leading axes broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {ad.shape} @ {bd.shape}")
    out = Tensor(ad @ bd)

    def bwd(g):
        ga = _unbroadcast(g @ bd.swapaxes(-1, -2), a.shape)
        gb = _unbroadcast(ad.swapaxes(-1, -2) @ g, b.shape)
        return ga, gb

    return _maybe_record(out, (a, b), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    in_shape = a.shape
    return _maybe_record(out, (a,), lambda g: (g.reshape(in_shape),))


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    out = Tensor(a.data.swapaxes(ax1, ax2))
    return _maybe_record(out, (a,), lambda g: (g.swapaxes(ax1, ax2),))


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis; backward zero-pads the complement."""
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Tensor(a.data[idx])
    in_shape = a.shape

    def bwd(g):
        full = np.zeros(in_shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return _maybe_record(out, (a,), bwd)


def take_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row gather `table[indices]`; backward scatter-adds into the table."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ValueError(
            f"row index out of range [0, {table.shape[0]}): "
            f"min {idx.min()}, max {idx.max()}"
        )
    out = Tensor(table.data[idx])
    tab_shape = table.shape

    def bwd(g):
        gt = np.zeros(tab_shape, dtype=g.dtype)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1, tab_shape[-1]))
        return (gt,)

    return _maybe_record(out, (table,), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    in_shape = a.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, in_shape).copy(),)
        gx = g
        if not keepdims:
            gx = np.expand_dims(gx, axis)
        return (np.broadcast_to(gx, in_shape).copy(),)

    return _maybe_record(out, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---------------------------------------------------------------------------
# fused neural-net ops
# ---------------------------------------------------------------------------

def softmax_rows(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Row-stabilized softmax over the last axis.

    `mask`, when given, is an additive bias of 0 / -inf broadcastable to
    `x.shape`; -inf entries (in the mask or in `x` itself) come out as
    exactly 0. A row with no finite entry raises DegenerateRowError.
    """
    logits = x.data if mask is None else x.data + mask
    row_max = np.max(logits, axis=-1, keepdims=True)
    bad = ~np.isfinite(row_max)
    if bad.any():
        raise DegenerateRowError(
            f"{int(bad.sum())} softmax row(s) have no finite entry"
        )
    shifted = logits - row_max
    e = np.exp(shifted)  # exp(-inf) == 0 exactly
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / denom
    out = Tensor(probs)

    def bwd(g):
        # dL/dlogits = p * (g - sum(p * g)); masked entries have p == 0
        inner = (probs * g).sum(axis=-1, keepdims=True)
        return (probs * (g - inner),)

    return _maybe_record(out, (x,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm affine params must have shape ({d},), "
            f"got gamma {gamma.shape}, beta {beta.shape}"
        )
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    var = ((xd - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv_std
    out = Tensor(xhat * gamma.data + beta.data)
    gdat = gamma.data

    def bwd(g):
        gx_hat = g * gdat
        m1 = gx_hat.mean(axis=-1, keepdims=True)
        m2 = (gx_hat * xhat).mean(axis=-1, keepdims=True)
        gx = (gx_hat - m1 - xhat * m2) * inv_std
        red = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return _maybe_record(out, (x, gamma, beta), bwd)
