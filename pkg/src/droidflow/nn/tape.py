"""Minimal reverse-mode autodiff over numpy arrays.

Just enough operator coverage for the graph and sequence networks here:
elementwise arithmetic with broadcasting, matrix products (including the
batched edge-transform product), gathers/scatters for embeddings and
message aggregation, and the usual squashing functions. Values are float64
throughout so finite-difference checks are meaningful.
"""

import numpy as np


class Var:
    """A node in the computation tape: value, accumulated grad, parent links."""

    __slots__ = ("value", "grad", "parents", "requires_grad")

    def __init__(self, value, parents=(), requires_grad=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents  # tuple of (Var, grad_fn)
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p, _ in parents)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape


def constant(x) -> Var:
    return Var(x, requires_grad=False)


def parameter(x) -> Var:
    return Var(x, requires_grad=True)


def backward(root: Var):
    """Accumulate gradients of root w.r.t. every reachable Var."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        v, expanded = stack.pop()
        if expanded:
            order.append(v)
            continue
        if id(v) in seen:
            continue
        seen.add(id(v))
        stack.append((v, True))
        for p, _ in v.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for v in reversed(order):
        if v.grad is None:
            continue
        for p, fn in v.parents:
            if not p.requires_grad:
                continue
            g = fn(v.grad)
            p.grad = g if p.grad is None else p.grad + g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Var, b: Var) -> Var:
    return Var(
        a.value + b.value,
        (
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(g, b.value.shape)),
        ),
    )


def sub(a: Var, b: Var) -> Var:
    return Var(
        a.value - b.value,
        (
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(-g, b.value.shape)),
        ),
    )


def mul(a: Var, b: Var) -> Var:
    return Var(
        a.value * b.value,
        (
            (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
        ),
    )


def scale(a: Var, c) -> Var:
    c = np.asarray(c, dtype=np.float64)
    return Var(a.value * c, ((a, lambda g: _unbroadcast(g * c, a.value.shape)),))


def matmul(a: Var, b: Var) -> Var:
    return Var(
        a.value @ b.value,
        (
            (a, lambda g: g @ b.value.T),
            (b, lambda g: a.value.T @ g),
        ),
    )


def bmm_vec(a: Var, x: Var) -> Var:
    """Batched (E, s, s) @ (E, s) -> (E, s)."""
    out = np.einsum("eij,ej->ei", a.value, x.value)
    return Var(
        out,
        (
            (a, lambda g: g[:, :, None] * x.value[:, None, :]),
            (x, lambda g: np.einsum("eij,ei->ej", a.value, g)),
        ),
    )


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return Var(y, ((a, lambda g: g * (1.0 - y * y)),))


def sigmoid(a: Var) -> Var:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Var(y, ((a, lambda g: g * y * (1.0 - y)),))


def reshape(a: Var, shape) -> Var:
    return Var(a.value.reshape(shape), ((a, lambda g: g.reshape(a.value.shape)),))


def concat(vs, axis=0) -> Var:
    values = [v.value for v in vs]
    out = np.concatenate(values, axis=axis)
    parents = []
    start = 0
    for v in vs:
        size = v.value.shape[axis]
        lo = start

        def fn(g, lo=lo, size=size):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, lo + size)
            return g[tuple(index)]

        parents.append((v, fn))
        start += size
    return Var(out, tuple(parents))


def slice_cols(a: Var, start: int, stop: int) -> Var:
    def fn(g):
        out = np.zeros_like(a.value)
        out[:, start:stop] = g
        return out

    return Var(a.value[:, start:stop], ((a, fn),))


def sum_axis(a: Var, axis: int, keepdims: bool = True) -> Var:
    def fn(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.value.shape).copy()

    return Var(a.value.sum(axis=axis, keepdims=keepdims), ((a, fn),))


def gather_rows(table: Var, idx) -> Var:
    idx = np.asarray(idx)

    def fn(g):
        out = np.zeros_like(table.value)
        np.add.at(out, idx, g)
        return out

    return Var(table.value[idx], ((table, fn),))


def segment_sum(x: Var, seg, num_segments: int) -> Var:
    seg = np.asarray(seg)
    out = np.zeros((num_segments,) + x.value.shape[1:], dtype=np.float64)
    np.add.at(out, seg, x.value)
    return Var(out, ((x, lambda g: g[seg]),))


def log_softmax(a: Var) -> Var:
    z = a.value - a.value.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def fn(g):
        return g - np.exp(logp) * g.sum(axis=-1, keepdims=True)

    return Var(logp, ((a, fn),))


def pick(a: Var, row: int, col: int) -> Var:
    def fn(g):
        out = np.zeros_like(a.value)
        out[row, col] = g.reshape(())
        return out

    return Var(a.value[row, col].reshape(()), ((a, fn),))


def neg(a: Var) -> Var:
    return scale(a, -1.0)
