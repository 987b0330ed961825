"""Reverse-mode differentiation over numpy arrays.

Every operation on a :class:`Var` appends one record to its :class:`Tape`:
the op name, the parent node indices and a closure mapping the output
adjoint to the parent adjoints. Nodes are only ever appended, so parents
always precede children and a single reverse sweep suffices.
"""
from __future__ import annotations

import numpy as np


class NonFiniteAdjointError(FloatingPointError):
    """Raised when a NaN/Inf adjoint first appears during a backward sweep."""

    def __init__(self, index: int, op: str):
        super().__init__(f"non-finite adjoint at tape node {index} (op={op!r})")
        self.index = index
        self.op = op


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    if np.shape(grad) == tuple(shape):
        return grad
    grad = np.asarray(grad)
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self.ops: list[str] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list = []
        self.values: list[np.ndarray] = []

    def __len__(self):
        return len(self.ops)

    def var(self, value, name: str = "leaf") -> "Var":
        """Register a leaf (input or parameter)."""
        return self.record(name, np.asarray(value, dtype=np.float64), (), None)

    def record(self, op, value, parents, vjp) -> "Var":
        self.ops.append(op)
        self.parents.append(tuple(p.index for p in parents))
        self.vjps.append(vjp)
        self.values.append(value)
        return Var(self, len(self.ops) - 1, value)

    def backward(self, root: "Var", check_finite: bool = True) -> list:
        """Adjoints of every node with respect to the scalar ``root``.

        Returns a fresh list aligned with the nodes (``None`` where the
        root does not depend on a node); the tape itself keeps no adjoint
        state, so it can be swept again.
        """
        if root.tape is not self:
            raise ValueError("root belongs to a different tape")
        if np.size(root.value) != 1:
            raise ValueError(f"backward needs a scalar root, got shape {np.shape(root.value)}")
        adj: list = [None] * len(self.ops)
        adj[root.index] = np.ones_like(root.value)
        for i in range(root.index, -1, -1):
            g = adj[i]
            if g is None:
                continue
            if check_finite and not np.all(np.isfinite(g)):
                raise NonFiniteAdjointError(i, self.ops[i])
            vjp = self.vjps[i]
            if vjp is None:
                continue
            for p, gp in zip(self.parents[i], vjp(g)):
                if gp is None:
                    continue
                adj[p] = gp if adj[p] is None else adj[p] + gp
        return adj

    def gradient(self, root: "Var", wrt, check_finite: bool = True) -> list[np.ndarray]:
        adj = self.backward(root, check_finite=check_finite)
        out = []
        for v in wrt:
            g = adj[v.index]
            out.append(np.zeros_like(v.value) if g is None else np.asarray(g, dtype=np.float64))
        return out


def _val(x):
    return x.value if isinstance(x, Var) else x


class Var:
    """Handle to one node on a tape; behaves like a numpy array."""

    __slots__ = ("tape", "index", "value")
    __array_priority__ = 1000

    def __init__(self, tape: Tape, index: int, value):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self):
        return f"Var(#{self.index}, shape={np.shape(self.value)})"

    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def ndim(self):
        return np.ndim(self.value)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None):
        return vsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("no Var among operands")


def add(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return a + b
    av, bv = _val(a), _val(b)
    out = av + bv
    sa, sb = np.shape(av), np.shape(bv)
    parents = [x for x in (a, b) if isinstance(x, Var)]

    def vjp(g):
        res = []
        if isinstance(a, Var):
            res.append(_unbroadcast(g, sa))
        if isinstance(b, Var):
            res.append(_unbroadcast(g, sb))
        return res

    return _tape_of(a, b).record("add", out, parents, vjp)


def neg(a):
    if not isinstance(a, Var):
        return -a
    return a.tape.record("neg", -a.value, (a,), lambda g: (-g,))


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return a * b
    av, bv = _val(a), _val(b)
    out = av * bv
    sa, sb = np.shape(av), np.shape(bv)
    parents = [x for x in (a, b) if isinstance(x, Var)]

    def vjp(g):
        res = []
        if isinstance(a, Var):
            res.append(_unbroadcast(g * bv, sa))
        if isinstance(b, Var):
            res.append(_unbroadcast(g * av, sb))
        return res

    return _tape_of(a, b).record("mul", out, parents, vjp)


def div(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return a / b
    av, bv = _val(a), _val(b)
    out = av / bv
    sa, sb = np.shape(av), np.shape(bv)
    parents = [x for x in (a, b) if isinstance(x, Var)]

    def vjp(g):
        res = []
        if isinstance(a, Var):
            res.append(_unbroadcast(g / bv, sa))
        if isinstance(b, Var):
            res.append(_unbroadcast(-g * out / bv, sb))
        return res

    return _tape_of(a, b).record("div", out, parents, vjp)


def power(a, p: float):
    """``a ** p`` for a constant exponent."""
    if not isinstance(a, Var):
        return np.power(a, p)
    av = a.value
    out = np.power(av, p)
    return a.tape.record("pow", out, (a,), lambda g: (g * p * np.power(av, p - 1),))


def matmul(a, b):
    """``a @ b`` with ``a`` of shape (..., k) and ``b`` of shape (k, m)."""
    if not isinstance(a, Var) and not isinstance(b, Var):
        return a @ b
    av, bv = _val(a), _val(b)
    if np.ndim(bv) != 2:
        raise ValueError("matmul supports a (k, m) right operand only")
    out = av @ bv
    parents = [x for x in (a, b) if isinstance(x, Var)]

    def vjp(g):
        res = []
        if isinstance(a, Var):
            res.append(g @ bv.T)
        if isinstance(b, Var):
            k = av.shape[-1]
            res.append(av.reshape(-1, k).T @ g.reshape(-1, bv.shape[1]))
        return res

    return _tape_of(a, b).record("matmul", out, parents, vjp)


def getitem(a, key):
    if not isinstance(a, Var):
        return a[key]
    av = a.value
    out = av[key]

    keys = key if isinstance(key, tuple) else (key,)
    fancy = any(isinstance(k, (list, np.ndarray)) for k in keys)

    def vjp(g):
        full = np.zeros_like(av)
        if fancy:
            np.add.at(full, key, g)
        else:
            full[key] = g
        return (full,)

    return a.tape.record("getitem", out, (a,), vjp)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    s0 = a.value.shape
    return a.tape.record("reshape", a.value.reshape(shape), (a,), lambda g: (g.reshape(s0),))


def vsum(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    av = a.value
    out = np.sum(av, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return a.tape.record("sum", out, (a,), vjp)


def mean(a, axis=None):
    if not isinstance(a, Var):
        return np.mean(a, axis=axis)
    n = np.size(a.value) if axis is None else np.shape(a.value)[axis]
    return vsum(a, axis) * (1.0 / n)


def stack(xs, axis=0):
    if not any(isinstance(x, Var) for x in xs):
        return np.stack(xs, axis=axis)
    vals = [_val(x) for x in xs]
    out = np.stack(vals, axis=axis)
    parents = [x for x in xs if isinstance(x, Var)]
    which = [i for i, x in enumerate(xs) if isinstance(x, Var)]

    def vjp(g):
        return [np.take(g, i, axis=axis) for i in which]

    return _tape_of(*xs).record("stack", out, parents, vjp)


def _unary(name, f, df):
    """Elementwise function; ``df(x, y)`` gives f'(x) from input and output."""

    def op(a):
        if not isinstance(a, Var):
            return f(a)
        av = a.value
        out = f(av)
        return a.tape.record(name, out, (a,), lambda g: (g * df(av, out),))

    op.__name__ = name
    return op


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


exp = _unary("exp", np.exp, lambda x, y: y)
log = _unary("log", np.log, lambda x, y: 1.0 / x)
log1p = _unary("log1p", np.log1p, lambda x, y: 1.0 / (1.0 + x))
sin = _unary("sin", np.sin, lambda x, y: np.cos(x))
cos = _unary("cos", np.cos, lambda x, y: -np.sin(x))
tanh = _unary("tanh", np.tanh, lambda x, y: 1.0 - y * y)
sqrt = _unary("sqrt", np.sqrt, lambda x, y: 0.5 / y)
softplus = _unary("softplus", _softplus, lambda x, y: _sigmoid(x))
sigmoid = _unary("sigmoid", _sigmoid, lambda x, y: y * (1.0 - y))
square = _unary("square", np.square, lambda x, y: 2.0 * x)


def clamp_min(a, floor: float):
    """``max(a, floor)``; the gradient is zero where the floor is active."""
    if not isinstance(a, Var):
        return np.maximum(a, floor)
    av = a.value
    out = np.maximum(av, floor)
    return a.tape.record("clamp_min", out, (a,), lambda g: (g * (av >= floor),))


def value(x):
    """Plain numpy value of a Var or array."""
    return _val(x)
