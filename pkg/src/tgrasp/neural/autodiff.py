"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

A DiffArray wraps values plus an optional gradient; operations record a tape
node (parents + backward closure). backward() on a scalar loss runs reverse
accumulation and then clears the tape. Gradients w.r.t. every requires_grad
leaf are exact analytic derivatives; tests check all of them against central
finite differences.
"""

import numpy as np

from ..errors import ShapeError, TrainingDiverged

_CHECK_FINITE = False


def set_debug_checks(enabled):
    """Verify every op output is finite (slow; used in tests)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


class DiffArray:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, values, requires_grad=False, parents=(), backward_fn=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward_fn = backward_fn if self.requires_grad else None
        if _CHECK_FINITE and not np.all(np.isfinite(self.values)):
            raise TrainingDiverged("non-finite values in forward pass")

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        return float(self.values)

    def __repr__(self):
        return f"DiffArray(shape={self.values.shape}, grad={'set' if self.grad is not None else 'none'})"


def as_diff(x):
    return x if isinstance(x, DiffArray) else DiffArray(x)


def leaf(values, requires_grad=True):
    return DiffArray(values, requires_grad=requires_grad)


def _accum(node, g):
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.zeros_like(node.values)
    node.grad += g


def _unbroadcast(g, shape):
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss):
    """Reverse accumulation from a finite scalar; clears the tape."""
    if loss.values.size != 1:
        raise ShapeError("backward", loss.values.shape, "a scalar")
    if not np.isfinite(loss.values):
        raise TrainingDiverged("loss is not finite")
    order = []
    seen = set()
    stack = [(loss, False)]
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
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward_fn is not None:
            node._backward_fn()
    for node in order:
        node._parents = ()
        node._backward_fn = None


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_diff(a), as_diff(b)
    try:
        vals = a.values + b.values
    except ValueError:
        raise ShapeError("add", a.values.shape, b.values.shape)
    out = DiffArray(vals, parents=(a, b))

    def backward_fn():
        _accum(a, _unbroadcast(out.grad, a.values.shape))
        _accum(b, _unbroadcast(out.grad, b.values.shape))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def sub(a, b):
    return add(a, neg(b))


def neg(a):
    a = as_diff(a)
    out = DiffArray(-a.values, parents=(a,))

    def backward_fn():
        _accum(a, -out.grad)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def mul(a, b):
    a, b = as_diff(a), as_diff(b)
    try:
        vals = a.values * b.values
    except ValueError:
        raise ShapeError("mul", a.values.shape, b.values.shape)
    out = DiffArray(vals, parents=(a, b))

    def backward_fn():
        _accum(a, _unbroadcast(out.grad * b.values, a.values.shape))
        _accum(b, _unbroadcast(out.grad * a.values, b.values.shape))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def scale(a, c):
    a = as_diff(a)
    c = float(c)
    out = DiffArray(a.values * c, parents=(a,))

    def backward_fn():
        _accum(a, out.grad * c)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def matmul(x, w):
    """x (..., m) or (..., n, m) times a 2-D weight (m, k)."""
    x, w = as_diff(x), as_diff(w)
    if w.values.ndim != 2:
        raise ShapeError("matmul weight", w.values.shape, "(m, k)")
    if x.values.shape[-1] != w.values.shape[0]:
        raise ShapeError("matmul", x.values.shape, f"(..., {w.values.shape[0]})")
    out = DiffArray(x.values @ w.values, parents=(x, w))

    def backward_fn():
        g = out.grad
        _accum(x, g @ w.values.T)
        flat_x = x.values.reshape(-1, x.values.shape[-1])
        flat_g = g.reshape(-1, w.values.shape[1])
        _accum(w, flat_x.T @ flat_g)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def relu(a):
    a = as_diff(a)
    out = DiffArray(np.maximum(a.values, 0.0), parents=(a,))

    def backward_fn():
        _accum(a, out.grad * (a.values > 0))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def sigmoid(a):
    a = as_diff(a)
    v = a.values
    s = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                 np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = DiffArray(s, parents=(a,))

    def backward_fn():
        _accum(a, out.grad * s * (1.0 - s))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def exp(a):
    a = as_diff(a)
    out = DiffArray(np.exp(a.values), parents=(a,))

    def backward_fn():
        _accum(a, out.grad * out.values)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def log(a):
    a = as_diff(a)
    out = DiffArray(np.log(a.values), parents=(a,))

    def backward_fn():
        _accum(a, out.grad / a.values)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def clip(a, lo, hi):
    """Clamp; gradient passes only where the input lies in [lo, hi]."""
    a = as_diff(a)
    out = DiffArray(np.clip(a.values, lo, hi), parents=(a,))
    inside = (a.values >= lo) & (a.values <= hi)

    def backward_fn():
        _accum(a, out.grad * inside)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def concat(parts, axis=-1):
    parts = [as_diff(p) for p in parts]
    out = DiffArray(np.concatenate([p.values for p in parts], axis=axis),
                    parents=tuple(parts))
    sizes = [p.values.shape[axis] for p in parts]

    def backward_fn():
        offsets = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.grad.ndim
            sl[axis if axis >= 0 else out.grad.ndim + axis] = slice(lo, hi)
            _accum(p, out.grad[tuple(sl)])
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def slice_last(a, start, stop):
    a = as_diff(a)
    out = DiffArray(a.values[..., start:stop], parents=(a,))

    def backward_fn():
        g = np.zeros_like(a.values)
        g[..., start:stop] = out.grad
        _accum(a, g)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def max_pool_over_set(a):
    """Column-wise max over the row axis: (..., N, C) -> (..., C).

    Ties route the gradient to the lowest row index.
    """
    a = as_diff(a)
    if a.values.ndim < 2:
        raise ShapeError("max_pool_over_set", a.values.shape, "(..., N, C)")
    idx = np.argmax(a.values, axis=-2)
    out = DiffArray(np.take_along_axis(a.values, idx[..., None, :],
                                       axis=-2).squeeze(-2), parents=(a,))

    def backward_fn():
        g = np.zeros_like(a.values)
        np.put_along_axis(g, idx[..., None, :], out.grad[..., None, :], axis=-2)
        _accum(a, g)
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def sum_all(a):
    a = as_diff(a)
    out = DiffArray(a.values.sum(), parents=(a,))

    def backward_fn():
        _accum(a, np.broadcast_to(out.grad, a.values.shape).copy())
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def mean(a):
    a = as_diff(a)
    out = DiffArray(a.values.mean(), parents=(a,))
    inv = 1.0 / a.values.size

    def backward_fn():
        _accum(a, np.full_like(a.values, float(out.grad) * inv))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out


def abs_sum(a):
    """L1 norm over every element; subgradient 0 at exact zeros."""
    a = as_diff(a)
    out = DiffArray(np.abs(a.values).sum(), parents=(a,))

    def backward_fn():
        _accum(a, float(out.grad) * np.sign(a.values))
    out._backward_fn = backward_fn if out.requires_grad else None
    return out
