"""Dense float64 tensors with reverse-mode differentiation.

A small tape: each op records its parents and a backward closure.  Only the
layer zoo the trainable modules need is implemented (elementwise arithmetic,
matmul, tanh/sigmoid, reductions, column concat/slice, layer norm and a gated
recurrent cell as fused ops).  No broadcasting beyond bias-style row vectors.
All op outputs are checked finite; NaN/Inf raises NumericalError immediately
so training aborts at the offending op rather than three modules later.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from ..errors import NumericalError

Array = np.ndarray


def _as_f64(x) -> Array:
    a = np.asarray(x, dtype=np.float64)
    return a


def _check_finite(a: Array, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite values produced by {what}")


class Tensor:
    """Array node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        _check_finite(self.data, "tensor construction")
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _op(out_data: Array, parents: tuple["Tensor", ...], backward, name: str) -> "Tensor":
        _check_finite(out_data, name)
        out = Tensor.__new__(Tensor)
        out.data = out_data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.array(g)  # own the buffer; g may be a view
        else:
            self.grad += g

    def backward(self) -> None:
        """Reverse sweep from a scalar loss; accumulates .grad on ancestors."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), scale(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- primitive ops -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor._op(out, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._op(out, (a, b), backward, "mul")


def scale(a, c: float) -> Tensor:
    a = _wrap(a)
    c = float(c)
    out = a.data * c

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return Tensor._op(out, (a,), backward, "scale")


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor._op(out, (a, b), backward, "matmul")


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out * out))

    return Tensor._op(out, (a,), backward, "tanh")


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return Tensor._op(out, (a,), backward, "sigmoid")


def tsum(a, axis=None) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.data.shape))
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return Tensor._op(np.asarray(out), (a,), backward, "sum")


def tmean(a, axis=None) -> Tensor:
    a = _wrap(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(tsum(a, axis=axis), 1.0 / n)


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    parts = [_wrap(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    widths = [p.data.shape[1] for p in parts]

    def backward(g):
        off = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accumulate(g[:, off : off + w])
            off += w

    return Tensor._op(out, tuple(parts), backward, "concat_cols")


def concat_rows(parts: Iterable[Tensor]) -> Tensor:
    parts = [_wrap(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=0)
    heights = [p.data.shape[0] for p in parts]

    def backward(g):
        off = 0
        for p, n in zip(parts, heights):
            if p.requires_grad:
                p._accumulate(g[off : off + n])
            off += n

    return Tensor._op(out, tuple(parts), backward, "concat_rows")


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _wrap(a)
    out = a.data[:, start:stop].copy()

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[:, start:stop] = g
            a._accumulate(full)

    return Tensor._op(out, (a,), backward, "slice_cols")


def layer_norm(a) -> Tensor:
    """Standardize along the last axis: zero mean, unit (biased) variance.

    No learned affine.  A degenerate (constant) row raises NumericalError:
    the caller is feeding a signal with no variance to normalize.
    """
    a = _wrap(a)
    x = a.data
    if x.shape[-1] < 2:
        raise ValueError("layer_norm needs an axis extent of at least 2")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    if np.any(var == 0.0):
        raise NumericalError("layer_norm: zero variance along the normalized axis")
    inv = 1.0 / np.sqrt(var)
    out = xc * inv

    def backward(g):
        if a.requires_grad:
            # d/dx of (x - mu)/sigma with biased sigma
            gm = g.mean(axis=-1, keepdims=True)
            gy = (g * out).mean(axis=-1, keepdims=True)
            a._accumulate(inv * (g - gm - out * gy))

    return Tensor._op(out, (a,), backward, "layer_norm")


def gru_cell(x, h, wr, ur, br, wz, uz, bz, wh, uh, bh) -> Tensor:
    """Fused gated recurrent cell step.

    r = sig(xWr + hUr + br); z = sig(xWz + hUz + bz)
    c = tanh(xWh + (r*h)Uh + bh); h' = (1-z)*h + z*c
    """
    tensors = [_wrap(t) for t in (x, h, wr, ur, br, wz, uz, bz, wh, uh, bh)]
    x, h, wr, ur, br, wz, uz, bz, wh, uh, bh = tensors
    xd, hd = x.data, h.data
    r = 1.0 / (1.0 + np.exp(-(xd @ wr.data + hd @ ur.data + br.data)))
    z = 1.0 / (1.0 + np.exp(-(xd @ wz.data + hd @ uz.data + bz.data)))
    rh = r * hd
    c = np.tanh(xd @ wh.data + rh @ uh.data + bh.data)
    out = (1.0 - z) * hd + z * c

    def backward(g):
        dz = g * (c - hd)
        dc = g * z
        dh = g * (1.0 - z)
        da_h = dc * (1.0 - c * c)
        drh = da_h @ uh.data.T
        dr = drh * hd
        dh = dh + drh * r
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dh = dh + da_r @ ur.data.T + da_z @ uz.data.T
        if x.requires_grad:
            x._accumulate(da_r @ wr.data.T + da_z @ wz.data.T + da_h @ wh.data.T)
        if h.requires_grad:
            h._accumulate(dh)
        if wr.requires_grad:
            wr._accumulate(xd.T @ da_r)
        if ur.requires_grad:
            ur._accumulate(hd.T @ da_r)
        if br.requires_grad:
            br._accumulate(da_r.sum(axis=0))
        if wz.requires_grad:
            wz._accumulate(xd.T @ da_z)
        if uz.requires_grad:
            uz._accumulate(hd.T @ da_z)
        if bz.requires_grad:
            bz._accumulate(da_z.sum(axis=0))
        if wh.requires_grad:
            wh._accumulate(xd.T @ da_h)
        if uh.requires_grad:
            uh._accumulate(rh.T @ da_h)
        if bh.requires_grad:
            bh._accumulate(da_h.sum(axis=0))

    return Tensor._op(out, tuple(tensors), backward, "gru_cell")


def autodiff_gradient(loss: Tensor, params: dict[str, Tensor]) -> dict[str, Array]:
    """Gradients of a scalar loss for every named parameter (zeros if unused)."""
    for p in params.values():
        p.grad = None
    loss.backward()
    grads = {}
    for name, p in params.items():
        grads[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
        _check_finite(grads[name], f"gradient of {name}")
    return grads
