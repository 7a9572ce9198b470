"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the tracker's costs are built from: elementwise
arithmetic, matrix products, reductions, max pooling, the logistic
family, slicing and concatenation. Gradients are exact; the finite
difference checker in ``gradcheck`` is the independent arbiter.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Var",
    "as_var",
    "affine",
    "matmul",
    "dot",
    "transpose",
    "concat",
    "stack",
    "vsum",
    "vmean",
    "vmax",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "sqrt",
    "bce_with_logits",
    "check_finite",
]


def check_finite(data, what="value"):
    """Raise if an array contains NaN or Inf (contract violation)."""
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite {what} encountered")
    return data


def _unbroadcast(grad, shape):
    # Sum the incoming gradient back down to the original operand shape.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Var:
    """A node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad=False, _prev=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _prev)
        self._prev = _prev if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Var(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, grad):
        grad = _unbroadcast(grad, self.data.shape).reshape(self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = as_var(other)
        out_data = self.data + other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(g)
            if other.requires_grad:
                other._accumulate(g)

        return Var(out_data, _prev=(self, other), _backward=bw)

    __radd__ = __add__

    def __neg__(self):
        def bw(g):
            if self.requires_grad:
                self._accumulate(-g)

        return Var(-self.data, _prev=(self,), _backward=bw)

    def __sub__(self, other):
        return self + (-as_var(other))

    def __rsub__(self, other):
        return as_var(other) + (-self)

    def __mul__(self, other):
        other = as_var(other)
        out_data = self.data * other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * other.data)
            if other.requires_grad:
                other._accumulate(g * self.data)

        return Var(out_data, _prev=(self, other), _backward=bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_var(other)
        out_data = self.data / other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(g / other.data)
            if other.requires_grad:
                other._accumulate(-g * self.data / (other.data**2))

        return Var(out_data, _prev=(self, other), _backward=bw)

    def __rtruediv__(self, other):
        return as_var(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")
        out_data = self.data**exponent

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * exponent * self.data ** (exponent - 1))

        return Var(out_data, _prev=(self,), _backward=bw)

    def __getitem__(self, key):
        out_data = self.data[key]

        def bw(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, key, g)
                self._accumulate(full)

        return Var(out_data, _prev=(self,), _backward=bw)

    def reshape(self, *shape):
        out_data = self.data.reshape(*shape)
        original = self.data.shape

        def bw(g):
            if self.requires_grad:
                self._accumulate(g.reshape(original))

        return Var(out_data, _prev=(self,), _backward=bw)


def as_var(x):
    return x if isinstance(x, Var) else Var(x)


# -- linear algebra ------------------------------------------------------


def matmul(a, b):
    """Matrix product covering the 2D@2D, 2D@1D and 1D@1D cases."""
    a, b = as_var(a), as_var(b)
    out_data = a.data @ b.data
    an, bn = a.data.ndim, b.data.ndim

    def bw(g):
        if an == 2 and bn == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif an == 2 and bn == 1:
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif an == 1 and bn == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, g))
        elif an == 1 and bn == 1:
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)
        else:
            raise ValueError(f"unsupported matmul ranks {an}@{bn}")

    return Var(out_data, _prev=(a, b), _backward=bw)


def dot(a, b):
    """Inner product of two vectors."""
    return matmul(a, b)


def transpose(a):
    a = as_var(a)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return Var(a.data.T, _prev=(a,), _backward=bw)


def affine(w, x, b):
    """W @ x + b for a single vector or a row-batch of vectors.

    For 2D ``x`` the product is taken row-wise: x @ W.T + b.
    """
    w, x, b = as_var(w), as_var(x), as_var(b)
    if w.data.ndim != 2:
        raise ValueError("weight must be a matrix")
    if x.data.ndim == 1:
        if w.data.shape[1] != x.data.shape[0] or b.data.shape[0] != w.data.shape[0]:
            raise ValueError(
                f"affine shape mismatch: W{w.data.shape} x{x.data.shape} b{b.data.shape}"
            )
        return matmul(w, x) + b
    if x.data.ndim == 2:
        if w.data.shape[1] != x.data.shape[1] or b.data.shape[0] != w.data.shape[0]:
            raise ValueError(
                f"affine shape mismatch: W{w.data.shape} x{x.data.shape} b{b.data.shape}"
            )
        return matmul(x, transpose(w)) + b
    raise ValueError("affine input must be a vector or a batch of vectors")


# -- reductions ----------------------------------------------------------


def vsum(a, axis=None, keepdims=False):
    a = as_var(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(ge, a.data.shape).copy())

    return Var(out_data, _prev=(a,), _backward=bw)


def vmean(a, axis=None, keepdims=False):
    a = as_var(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return vsum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def vmax(a, axis):
    """Max over one axis; ties route the gradient to the first argmax."""
    a = as_var(a)
    out_data = a.data.max(axis=axis)
    idx = a.data.argmax(axis=axis)

    def bw(g):
        if not a.requires_grad:
            return
        full = np.zeros_like(a.data)
        grid = np.indices(out_data.shape)
        index = list(grid)
        index.insert(axis if axis >= 0 else a.data.ndim + axis, idx)
        full[tuple(index)] = g
        a._accumulate(full)

    return Var(out_data, _prev=(a,), _backward=bw)


# -- nonlinearities ------------------------------------------------------


def relu(a):
    a = as_var(a)
    mask = a.data > 0

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return Var(a.data * mask, _prev=(a,), _backward=bw)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_var(a)
    s = _sigmoid(np.atleast_1d(a.data)).reshape(a.data.shape)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * s * (1.0 - s))

    return Var(s, _prev=(a,), _backward=bw)


def exp(a):
    a = as_var(a)
    out_data = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return Var(out_data, _prev=(a,), _backward=bw)


def log(a):
    a = as_var(a)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return Var(np.log(a.data), _prev=(a,), _backward=bw)


def sqrt(a):
    a = as_var(a)
    out_data = np.sqrt(a.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * 0.5 / out_data)

    return Var(out_data, _prev=(a,), _backward=bw)


def bce_with_logits(logits, targets):
    """Elementwise binary cross-entropy from raw scores, numerically stable.

    ``targets`` is a constant 0/1 array. Forward uses the
    max(z,0) - z*y + log(1+exp(-|z|)) form; the gradient is sigma(z) - y.
    """
    z = as_var(logits)
    y = np.asarray(targets, dtype=np.float64)
    zd = z.data
    out_data = np.maximum(zd, 0.0) - zd * y + np.log1p(np.exp(-np.abs(zd)))

    def bw(g):
        if z.requires_grad:
            z._accumulate(g * (_sigmoid(np.atleast_1d(zd)).reshape(zd.shape) - y))

    return Var(out_data, _prev=(z,), _backward=bw)


# -- structural ops ------------------------------------------------------


def concat(parts, axis=0):
    parts = [as_var(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])

    return Var(out_data, _prev=tuple(parts), _backward=bw)


def stack(parts, axis=0):
    parts = [as_var(p) for p in parts]
    out_data = np.stack([p.data for p in parts], axis=axis)

    def bw(g):
        for i, p in enumerate(parts):
            if p.requires_grad:
                p._accumulate(np.take(g, i, axis=axis))

    return Var(out_data, _prev=tuple(parts), _backward=bw)
