"""Reverse-mode autodiff over numpy arrays.

Every op builds its output eagerly and, when any input requires a gradient,
records a closure that pushes the output gradient back to its inputs.
``Tensor.backward`` replays those closures in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Skip tape recording, e.g. for autoregressive inference."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class DimensionError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


class DegenerateMaskError(ValueError):
    pass


def _check_finite(data: np.ndarray, what: str = "tensor") -> None:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{what} contains NaN or Inf")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str | None = None,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[np.ndarray], None] | None = None,
        check: bool = True,
    ):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if check:
            _check_finite(arr, name or "tensor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        # never in place: incoming arrays may be shared between parents
        g = np.asarray(g).astype(self.data.dtype, copy=False)
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() without a gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed after propagation
                if node._parents:
                    node.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    return Tensor(
        data,
        requires_grad=needs,
        _parents=tuple(parents) if needs else (),
        _backward=backward if needs else None,
        check=False,
    )


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading dims."""
    if a.shape[-1] != b.shape[-2 if b.data.ndim > 1 else 0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def linear_forward(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` over any number of leading dims of ``x``."""
    if w.data.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear: x{x.shape} incompatible with w{w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise DimensionError(f"linear: bias{b.shape} incompatible with w{w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, w.shape[0])
    y = x2 @ w.data
    if b is not None:
        y = y + b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        g2 = g.reshape(-1, w.shape[1])
        if x.requires_grad:
            x._accumulate((g2 @ w.data.T).reshape(x.shape))
        if w.requires_grad:
            w._accumulate(x2.T @ g2)
        if b is not None and b.requires_grad:
            b._accumulate(g2.sum(axis=0))

    return _make(y.reshape(*lead, w.shape[1]), parents, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _make(np.maximum(x.data, 0), (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward(g):
        x._accumulate(g.reshape(x.shape))

    return _make(x.data.reshape(shape), (x,), backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def backward(g):
        x._accumulate(np.transpose(g, inverse))

    return _make(np.transpose(x.data, axes), (x,), backward)


def take(x: Tensor, idx) -> Tensor:
    def backward(g):
        full = np.zeros_like(x.data)
        full[idx] += g
        x._accumulate(full)

    return _make(x.data[idx], (x,), backward)


def concat(xs: Sequence[Tensor], axis: int) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                x._accumulate(g[tuple(sl)])

    return _make(np.concatenate([x.data for x in xs], axis=axis), xs, backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    n = x.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            x._accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return _make(xhat * gain.data + bias.data, (x, gain, bias), backward)


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, overwriting ``s``."""
    np.subtract(s, s.max(axis=-1, keepdims=True), out=s)
    np.exp(s, out=s)
    s *= 1.0 / s.sum(axis=-1, keepdims=True)
    return s


def _check_mask(mask: np.ndarray, scores_shape: tuple[int, ...]) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != scores_shape[-mask.ndim :]:
        raise DimensionError(f"mask{mask.shape} does not match scores{scores_shape}")
    if not np.isfinite(mask).any(axis=-1).all():
        raise DegenerateMaskError("mask hides every entry of at least one row")
    return mask


def softmax_masked(scores: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row softmax of ``scores + mask`` over the last axis.

    ``mask`` holds 0 for visible and -inf for hidden entries and broadcasts
    against the trailing dims of ``scores``. Hidden entries come out as
    exact zeros.
    """
    s = scores.data.copy()
    if mask is not None:
        s += _check_mask(mask, s.shape).astype(s.dtype, copy=False)
    p = _softmax_rows(s)

    def backward(g):
        scores._accumulate(p * (g - (g * p).sum(axis=-1, keepdims=True)))

    return _make(p, (scores,), backward)


def multi_head_attention(
    x: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, heads: int, mask: np.ndarray | None = None
) -> Tensor:
    """Concatenated head contexts ``softmax((Q K^T + M) / sqrt(d)) V`` for x of shape (B, L, h).

    Fused for speed; equivalent to composing projections, ``softmax_masked``
    and batched matmuls.
    """
    B, L, h = x.shape
    if h % heads:
        raise DimensionError(f"width {h} not divisible by {heads} heads")
    d = h // heads
    c = 1.0 / np.sqrt(d)
    w = np.concatenate([wq.data, wk.data, wv.data], axis=1)
    x2 = x.data.reshape(B * L, h)
    qkv = (x2 @ w).reshape(B, L, 3, heads, d).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    s = q @ k.transpose(0, 1, 3, 2)
    s *= c
    if mask is not None:
        s += _check_mask(mask, s.shape).astype(s.dtype, copy=False)
    p = _softmax_rows(s)
    ctx = (p @ v).transpose(0, 2, 1, 3).reshape(B, L, h)

    def backward(g):
        gh = g.reshape(B, L, heads, d).transpose(0, 2, 1, 3)
        dv = p.transpose(0, 1, 3, 2) @ gh
        dp = gh @ v.transpose(0, 1, 3, 2)
        ds = dp
        ds -= (dp * p).sum(axis=-1, keepdims=True)
        ds *= p
        ds *= c
        dq = ds @ k
        dk = ds.transpose(0, 1, 3, 2) @ q
        dqkv = np.stack([dq, dk, dv]).transpose(1, 3, 0, 2, 4).reshape(B * L, 3 * h)
        if x.requires_grad:
            x._accumulate((dqkv @ w.T).reshape(B, L, h))
        dw = x2.T @ dqkv
        for t, lo in ((wq, 0), (wk, h), (wv, 2 * h)):
            if t.requires_grad:
                t._accumulate(dw[:, lo : lo + h])

    return _make(ctx, (x, wq, wk, wv), backward)


def mean_squared_error(pred: Tensor, target) -> Tensor:
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionError(f"loss shape mismatch: pred{pred.shape} vs target{target.shape}")
    diff = pred.data - target
    n = diff.size

    def backward(g):
        pred._accumulate(g * (2.0 / n) * diff)

    return _make(np.asarray((diff * diff).mean(), dtype=pred.dtype), (pred,), backward)


def scale(x: Tensor, c: float) -> Tensor:
    def backward(g):
        x._accumulate(g * c)

    return _make(x.data * c, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(np.broadcast_to(g, x.shape))

    return _make(np.asarray(x.data.sum(), dtype=x.dtype), (x,), backward)
