"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Tensors wrap a numpy array plus an optional gradient buffer. Operations build
a computation graph on the fly; calling ``backward()`` on a scalar loss walks
the graph in reverse topological order and accumulates gradients into every
reachable tensor with ``requires_grad`` set. Gradients accumulate across
repeated backward calls until explicitly zeroed.

Arrays are float32 by default; pass float64 data for the gradient-check
configuration. Masks and index arrays are plain numpy arrays, never Tensors.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GradError(RuntimeError):
    """Gradient-related contract violation (non-scalar backward, missing grad)."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Dense n-dimensional float array participating in reverse-mode AD."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the named functions below do the work.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other, ref=self), -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """Reverse-mode pass from a scalar loss.

        Populates ``grad`` on every reachable tensor with ``requires_grad``.
        Leaf gradients accumulate across calls; intermediate buffers are
        fresh per call, so zeroing the leaves between calls makes repeated
        backward passes reproducible.
        """
        if self.data.size != 1:
            raise GradError(
                f"backward() requires a scalar loss, got shape {self.data.shape}"
            )
        topo = _topo_order(self)
        for node in topo:
            if node._parents:
                node.grad = np.zeros_like(node.data)
            elif node.requires_grad and node.grad is None:
                node.grad = np.zeros_like(node.data)
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative DFS postorder over grad-requiring nodes (graphs can be deep)."""
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    return topo


def _as_tensor(x, ref: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = ref.data.dtype if ref is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _make_node(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# arithmetic primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, ref=a)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.data.shape)

    return _make_node(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, ref=a)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return _make_node(data, (a, b), backward)


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    data = a.data * s

    def backward(g):
        if a.requires_grad:
            a.grad += g * s

    return _make_node(data, (a,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading axes."""
    a = _as_tensor(a)
    b = _as_tensor(b, ref=a)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(
            f"matmul requires ndim >= 2 operands, got {a.shape} @ {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)

    return _make_node(data, (a, b), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            gk = g if keepdims else np.expand_dims(g, axis)
            a.grad += np.broadcast_to(gk, a.data.shape)

    return _make_node(data, (a,), backward)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.grad += g.reshape(a.data.shape)

    return _make_node(data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = a.data.transpose(axes)

    def backward(g):
        if a.requires_grad:
            a.grad += g.transpose(inverse)

    return _make_node(data, (a,), backward)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p.grad += g[tuple(idx)]

    return _make_node(data, parts, backward)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis; gradient scatters back into place."""
    a = _as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = a.data[idx]

    def backward(g):
        if a.requires_grad:
            a.grad[idx] += g

    return _make_node(data, (a,), backward)


def matrix_block(a, r0: int, r1: int, c0: int, c1: int) -> Tensor:
    """Rectangular block of a 2-D tensor."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"matrix_block expects a 2-D tensor, got {a.shape}")
    data = a.data[r0:r1, c0:c1]

    def backward(g):
        if a.requires_grad:
            a.grad[r0:r1, c0:c1] += g

    return _make_node(data, (a,), backward)


def time_slice(a, t: int) -> Tensor:
    """Select step ``t`` from a (B, n, ...) tensor, dropping the time axis."""
    a = _as_tensor(a)
    data = a.data[:, t]

    def backward(g):
        if a.requires_grad:
            a.grad[:, t] += g

    return _make_node(data, (a,), backward)


def stack_time(steps: Sequence[Tensor]) -> Tensor:
    """Stack per-step (B, ...) tensors into (B, n, ...)."""
    parts = [_as_tensor(s) for s in steps]
    data = np.stack([p.data for p in parts], axis=1)

    def backward(g):
        for t, p in enumerate(parts):
            if p.requires_grad:
                p.grad += g[:, t]

    return _make_node(data, parts, backward)


def shift_time(a, offset: int) -> Tensor:
    """Shift a (B, n, d) tensor along time: out[:, t] = a[:, t - offset].

    Positions shifted in from beyond either boundary are zero.
    """
    a = _as_tensor(a)
    n = a.data.shape[1]
    data = np.zeros_like(a.data)
    if offset >= 0:
        data[:, offset:] = a.data[:, : n - offset]
    else:
        data[:, : n + offset] = a.data[:, -offset:]

    def backward(g):
        if not a.requires_grad:
            return
        if offset >= 0:
            a.grad[:, : n - offset] += g[:, offset:]
        else:
            a.grad[:, -offset:] += g[:, : n + offset]

    return _make_node(data, (a,), backward)


def where(cond: np.ndarray, a, b) -> Tensor:
    """Elementwise select by a constant boolean mask; gradients route by it."""
    a = _as_tensor(a)
    b = _as_tensor(b, ref=a)
    cond = np.asarray(cond, dtype=bool)
    data = np.where(cond, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(np.where(cond, g, 0.0), a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(np.where(cond, 0.0, g), b.data.shape)

    return _make_node(data, (a, b), backward)


# ---------------------------------------------------------------------------
# nonlinearities and normalizers
# ---------------------------------------------------------------------------


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a.grad += g * (a.data > 0)

    return _make_node(data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a.grad += g * data * (1.0 - data)

    return _make_node(data, (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.grad += g * (1.0 - data * data)

    return _make_node(data, (a,), backward)


def softmax(a, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Numerically stabilized softmax; masked positions are exactly zero.

    ``mask`` is a boolean array broadcastable to ``a``; True marks entries
    that participate. Every softmax group must keep at least one entry.
    """
    a = _as_tensor(a)
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise ValueError("softmax group is fully masked")
        x = np.where(mask, x, -np.inf)
    # Non-finite inputs (a diverging model) flow through as NaN output
    # rather than erroring here, so the caller can see the NaN loss.
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            inner = (g * data).sum(axis=axis, keepdims=True)
            a.grad += data * (g - inner)

    return _make_node(data, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def backward(g):
        if a.requires_grad:
            a.grad += g - np.exp(data) * g.sum(axis=axis, keepdims=True)

    return _make_node(data, (a,), backward)


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    out_k = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    data = out_k if keepdims else np.squeeze(out_k, axis=axis)

    def backward(g):
        if a.requires_grad:
            gk = g if keepdims else np.expand_dims(g, axis)
            a.grad += np.exp(a.data - out_k) * gk

    return _make_node(data, (a,), backward)


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply the affine (gamma, beta)."""
    a = _as_tensor(a)
    gamma = _as_tensor(gamma, ref=a)
    beta = _as_tensor(beta, ref=a)
    d = a.data.shape[-1]
    if d == 0:
        raise ShapeError("layer_norm over an empty feature axis")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma.grad += _unbroadcast(g * xhat, gamma.data.shape)
        if beta.requires_grad:
            beta.grad += _unbroadcast(g, beta.data.shape)
        if a.requires_grad:
            gx = g * gamma.data
            a.grad += inv * (
                gx
                - gx.mean(axis=-1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            )

    return _make_node(data, (a, gamma, beta), backward)


def dropout(a, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout: identity in evaluation mode, scaled mask in training."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    a = _as_tensor(a)
    if not training or p == 0.0:
        return a
    keep = rng.random(a.data.shape) >= p
    scale_factor = 1.0 / (1.0 - p)
    factor = keep.astype(a.data.dtype) * scale_factor
    data = a.data * factor

    def backward(g):
        if a.requires_grad:
            a.grad += g * factor

    return _make_node(data, (a,), backward)


# ---------------------------------------------------------------------------
# lookups and gathers
# ---------------------------------------------------------------------------


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    """Rows of ``table`` (V, e) selected by an integer id array."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(
            f"token id out of range [0, {table.data.shape[0]}): "
            f"min={ids.min()}, max={ids.max()}"
        )
    data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            np.add.at(table.grad, ids, g)

    return _make_node(data, (table,), backward)


def gather_last(a, idx: np.ndarray) -> Tensor:
    """Pick one entry along the last axis: out[...] = a[..., idx[...]]."""
    a = _as_tensor(a)
    idx = np.asarray(idx)
    if idx.shape != a.data.shape[:-1]:
        raise ShapeError(
            f"gather_last index shape {idx.shape} does not match {a.data.shape[:-1]}"
        )
    grid = np.meshgrid(*[np.arange(n) for n in idx.shape], indexing="ij")
    sel = tuple(grid) + (idx,)
    data = a.data[sel]

    def backward(g):
        if a.requires_grad:
            np.add.at(a.grad, sel, g)

    return _make_node(data, (a,), backward)


def gather_2d(m, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Entries m[rows[i], cols[i]] of a 2-D tensor, as a flat vector."""
    m = _as_tensor(m)
    rows = np.asarray(rows).reshape(-1)
    cols = np.asarray(cols).reshape(-1)
    data = m.data[rows, cols]

    def backward(g):
        if m.requires_grad:
            np.add.at(m.grad, (rows, cols), g)

    return _make_node(data, (m,), backward)


def maxpool_over_time(a, mask: np.ndarray) -> Tensor:
    """Column-wise max over the time axis of (B, n, d), honoring the mask.

    Padded positions never win. Ties route the gradient to the earliest
    winning time step.
    """
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape[:2]:
        raise ShapeError(
            f"mask shape {mask.shape} does not match {a.data.shape[:2]}"
        )
    if not mask.any(axis=1).all():
        raise ValueError("maxpool_over_time: a sequence has no real tokens")
    filled = np.where(mask[:, :, None], a.data, -np.inf)
    argmax = filled.argmax(axis=1)  # (B, d)
    data = np.take_along_axis(a.data, argmax[:, None, :], axis=1)[:, 0, :]
    B, _, d = a.data.shape
    bi, di = np.meshgrid(np.arange(B), np.arange(d), indexing="ij")

    def backward(g):
        if a.requires_grad:
            np.add.at(a.grad, (bi, argmax, di), g)

    return _make_node(data, (a,), backward)
