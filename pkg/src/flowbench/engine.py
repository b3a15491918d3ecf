"""Minimal reverse-mode automatic differentiation on numpy arrays.

A Var wraps a float64 ndarray. Operations performed while a Tape is active
append (output, backward-closure) pairs to the tape in execution order;
Tape.backward replays the list once, in reverse, accumulating gradients into
Var.grad. Only results that (transitively) depend on a Var created with
needs_grad=True are recorded, so data-only arithmetic costs nothing extra.

The op set is exactly what normalizing flows need: broadcasting arithmetic,
matmul, the usual scalar maps, reductions, reshapes/concat/slicing, gather
along the last axis, cumulative sum, and a softmax. All arrays are float64;
mixed precision is deliberately unsupported.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError

Array = np.ndarray

_TAPE_STACK: list["Tape"] = []


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Var:
    """A float64 array plus an accumulated gradient of the same shape."""

    __slots__ = ("data", "grad", "needs_grad")

    def __init__(self, data, needs_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.needs_grad = bool(needs_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Var(shape={self.data.shape}, needs_grad={self.needs_grad})"

    # operator sugar; scalars and ndarrays are wrapped as constants
    def __add__(self, other):
        return add(self, as_var(other))

    def __radd__(self, other):
        return add(as_var(other), self)

    def __sub__(self, other):
        return sub(self, as_var(other))

    def __rsub__(self, other):
        return sub(as_var(other), self)

    def __mul__(self, other):
        return mul(self, as_var(other))

    def __rmul__(self, other):
        return mul(as_var(other), self)

    def __truediv__(self, other):
        return div(self, as_var(other))

    def __rtruediv__(self, other):
        return div(as_var(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return powc(self, exponent)

    def __matmul__(self, other):
        return matmul(self, as_var(other))


def as_var(x) -> Var:
    """Wrap scalars/arrays as constant Vars; pass Vars through."""
    if isinstance(x, Var):
        return x
    return Var(np.asarray(x, dtype=np.float64))


class Tape:
    """Execution-order record of differentiable ops.

    Use as a context manager around the forward pass, then call gradient()
    (or backward()) once. The node list is replayed in exact reverse order,
    visiting each recorded op once.
    """

    __slots__ = ("_nodes",)

    def __init__(self) -> None:
        self._nodes: list[tuple[Var, Callable[[Array], None]]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise RuntimeError("tape stack corrupted")

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Var) -> None:
        """Seed d(loss)/d(loss) = 1 and accumulate grads into Var.grad."""
        if loss.data.size != 1:
            raise ContractError(
                f"backward needs a scalar loss, got shape {loss.data.shape}"
            )
        loss.grad = np.ones_like(loss.data)
        for out, bw in reversed(self._nodes):
            if out.grad is not None:
                bw(out.grad)

    def gradient(self, loss: Var, store) -> Array:
        """Run backward and return the flat gradient over a ParamStore.

        Parameter grads are cleared first, so each tape yields exactly the
        gradient of its own loss.
        """
        store.zero_grads()
        self.backward(loss)
        return store.gather_grads()


def _record(out: Var, bw: Callable[[Array], None]) -> None:
    tape = _active_tape()
    if tape is not None and out.needs_grad:
        tape._nodes.append((out, bw))


def _needs(*parents: Var) -> bool:
    if _active_tape() is None:
        return False
    return any(p.needs_grad for p in parents)


def _accum(var: Var, g: Array) -> None:
    if not var.needs_grad:
        return
    if var.grad is None:
        var.grad = np.zeros_like(var.data)
    var.grad += g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g down to `shape`, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Var, b: Var) -> Var:
    out = Var(a.data + b.data, _needs(a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    _record(out, bw)
    return out


def sub(a: Var, b: Var) -> Var:
    out = Var(a.data - b.data, _needs(a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    _record(out, bw)
    return out


def mul(a: Var, b: Var) -> Var:
    out = Var(a.data * b.data, _needs(a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    _record(out, bw)
    return out


def div(a: Var, b: Var) -> Var:
    out = Var(a.data / b.data, _needs(a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * out.data / b.data, b.data.shape))

    _record(out, bw)
    return out


def neg(a: Var) -> Var:
    out = Var(-a.data, _needs(a))

    def bw(g: Array) -> None:
        _accum(a, -g)

    _record(out, bw)
    return out


def powc(a: Var, exponent: float) -> Var:
    """a ** c for a constant exponent."""
    c = float(exponent)
    out = Var(a.data**c, _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g * c * a.data ** (c - 1.0))

    _record(out, bw)
    return out


# ---------------------------------------------------------------------------
# scalar maps


def exp(a: Var) -> Var:
    out = Var(np.exp(a.data), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g * out.data)

    _record(out, bw)
    return out


def log(a: Var) -> Var:
    out = Var(np.log(a.data), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g / a.data)

    _record(out, bw)
    return out


def sqrt(a: Var) -> Var:
    out = Var(np.sqrt(a.data), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g * 0.5 / out.data)

    _record(out, bw)
    return out


def relu(a: Var) -> Var:
    mask = a.data > 0.0
    out = Var(np.where(mask, a.data, 0.0), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g * mask)

    _record(out, bw)
    return out


def softplus(a: Var) -> Var:
    """log(1 + exp(a)), overflow-safe in both directions."""
    out = Var(np.logaddexp(0.0, a.data), _needs(a))
    if out.needs_grad:
        sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))

        def bw(g: Array) -> None:
            _accum(a, g * sig)

        _record(out, bw)
    return out


def clip(a: Var, lo: float, hi: float) -> Var:
    """Clamp to [lo, hi]; gradient passes through inside, zero outside."""
    out = Var(np.clip(a.data, lo, hi), _needs(a))
    if out.needs_grad:
        mask = (a.data >= lo) & (a.data <= hi)

        def bw(g: Array) -> None:
            _accum(a, g * mask)

        _record(out, bw)
    return out


# ---------------------------------------------------------------------------
# linear algebra and structure


def matmul(a: Var, b: Var) -> Var:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-d operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}"
        )
    out = Var(a.data @ b.data, _needs(a, b))

    def bw(g: Array) -> None:
        if a.needs_grad:
            _accum(a, g @ b.data.T)
        if b.needs_grad:
            _accum(b, a.data.T @ g)

    _record(out, bw)
    return out


def reshape(a: Var, shape: Sequence[int]) -> Var:
    shape = tuple(shape)
    out = Var(a.data.reshape(shape), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, g.reshape(a.data.shape))

    _record(out, bw)
    return out


def concat(parts: Sequence[Var], axis: int = -1) -> Var:
    parts = list(parts)
    out = Var(np.concatenate([p.data for p in parts], axis=axis), _needs(*parts))
    if out.needs_grad:
        sizes = [p.data.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]

        def bw(g: Array) -> None:
            for p, piece in zip(parts, np.split(g, splits, axis=axis)):
                _accum(p, piece)

        _record(out, bw)
    return out


def take_range_last(a: Var, start: int, stop: int) -> Var:
    """Slice [..., start:stop] along the last axis."""
    out = Var(a.data[..., start:stop], _needs(a))

    def bw(g: Array) -> None:
        if a.needs_grad:
            full = np.zeros_like(a.data)
            full[..., start:stop] = g
            _accum(a, full)

    _record(out, bw)
    return out


def take_along_last(a: Var, idx: Array) -> Var:
    """Gather one entry per row along the last axis; idx shape = a.shape[:-1]."""
    if idx.shape != a.data.shape[:-1]:
        raise ShapeError(
            f"gather index shape {idx.shape} != batch shape {a.data.shape[:-1]}"
        )
    out = Var(
        np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0], _needs(a)
    )

    def bw(g: Array) -> None:
        if a.needs_grad:
            full = np.zeros_like(a.data)
            np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
            _accum(a, full)

    _record(out, bw)
    return out


def permute_cols(a: Var, perm: Array) -> Var:
    """Reorder the columns of a 2-d array: out[:, j] = a[:, perm[j]]."""
    if a.data.ndim != 2:
        raise ShapeError(f"permute_cols expects a 2-d array, got {a.data.shape}")
    out = Var(a.data[:, perm], _needs(a))

    def bw(g: Array) -> None:
        if a.needs_grad:
            full = np.zeros_like(a.data)
            full[:, perm] = g
            _accum(a, full)

    _record(out, bw)
    return out


def cumsum_last(a: Var) -> Var:
    out = Var(np.cumsum(a.data, axis=-1), _needs(a))

    def bw(g: Array) -> None:
        _accum(a, np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1))

    _record(out, bw)
    return out


def softmax_last(a: Var) -> Var:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Var(y, _needs(a))

    def bw(g: Array) -> None:
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    _record(out, bw)
    return out


# ---------------------------------------------------------------------------
# reductions


def vsum(a: Var, axis=None, keepdims: bool = False) -> Var:
    out = Var(a.data.sum(axis=axis, keepdims=keepdims), _needs(a))

    def bw(g: Array) -> None:
        if not a.needs_grad:
            return
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg, a.data.shape))

    _record(out, bw)
    return out


def vmean(a: Var, axis=None, keepdims: bool = False) -> Var:
    out = Var(a.data.mean(axis=axis, keepdims=keepdims), _needs(a))
    if out.needs_grad:
        n = a.data.size // max(out.data.size, 1)

        def bw(g: Array) -> None:
            if axis is None:
                _accum(a, np.broadcast_to(g / n, a.data.shape))
                return
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg / n, a.data.shape))

        _record(out, bw)
    return out


# ---------------------------------------------------------------------------
# finite differences, for gradient verification


def numeric_gradient(
    f: Callable[[Array], float], x: Array, step: float = 1e-6
) -> Array:
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g
