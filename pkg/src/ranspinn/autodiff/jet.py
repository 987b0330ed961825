"""Second-order forward-mode jets.

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to a small set of *active* inputs (the spatial coordinates). The
components may be plain numpy arrays or tape :class:`~.tape.Var` objects;
in the latter case every jet operation is itself recorded, so parameter
gradients of quantities built from input derivatives stay exact.

Storage layout: ``grad`` has shape ``(n,) + S`` and ``hess`` has shape
``(m,) + S`` with ``m = n (n + 1) / 2`` holding the upper triangle in
row-major order ``(0,0), (0,1), ..., (1,1), ...``. ``S`` is the value shape
(``()`` for a single point, ``(B,)`` for a batch).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _kernels
from . import tape as ad
from .tape import Var


class DerivativeDomainError(ArithmeticError):
    """An operation was evaluated outside the domain where it is differentiable."""

    def __init__(self, op: str, point, value):
        super().__init__(f"{op}: argument {value!r} out of domain at point {point!r}")
        self.op = op
        self.point = point
        self.value = value


@lru_cache(maxsize=None)
def tri_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the stored upper-triangle Hessian entries."""
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    rows = np.array([p[0] for p in pairs], dtype=np.intp)
    cols = np.array([p[1] for p in pairs], dtype=np.intp)
    return rows, cols


def tri_index(i: int, j: int, n: int) -> int:
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


def _first_bad(mask, value):
    """Locate the first offending entry for an error message."""
    mask = np.asarray(mask)
    v = np.asarray(value)
    if mask.ndim == 0:
        return (), float(v)
    idx = tuple(int(k) for k in np.argwhere(mask)[0])
    return idx, float(v[idx])


class Jet2:
    """Value, gradient and Hessian of a scalar field over ``n`` active inputs."""

    __slots__ = ("value", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @property
    def n(self) -> int:
        return np.shape(ad.value(self.grad))[0]

    @classmethod
    def constant(cls, value, n: int) -> "Jet2":
        v = np.asarray(ad.value(value), dtype=np.float64)
        shape = np.shape(v)
        return cls(value, np.zeros((n,) + shape), np.zeros((n * (n + 1) // 2,) + shape))

    def hessian(self) -> np.ndarray:
        """Full symmetric Hessian, shape ``(n, n) + S`` (numpy values only)."""
        h = np.asarray(ad.value(self.hess))
        n = self.n
        out = np.empty((n, n) + h.shape[1:])
        rows, cols = tri_pairs(n)
        for p, (i, j) in enumerate(zip(rows, cols)):
            out[i, j] = h[p]
            out[j, i] = h[p]
        return out

    def numpy(self) -> "Jet2":
        """Detach from the tape."""
        return Jet2(np.asarray(ad.value(self.value)), np.asarray(ad.value(self.grad)),
                    np.asarray(ad.value(self.hess)))

    def __repr__(self):
        return f"Jet2(value={ad.value(self.value)!r}, grad={ad.value(self.grad)!r}, hess={ad.value(self.hess)!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return mul(reciprocal(self), other)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)


def seed_inputs(coords, active) -> list[Jet2]:
    """Jets for raw inputs; ``active`` lists the indices derivatives are taken over.

    Inactive inputs (for instance the Reynolds number) get zero derivatives.
    ``coords`` may hold scalars or equally shaped arrays (a batch of points).
    """
    active = list(active)
    if not active:
        raise ValueError("seed_inputs needs at least one active input")
    if any(i < 0 or i >= len(coords) for i in active):
        raise IndexError(f"active indices {active} out of range for {len(coords)} inputs")
    n = len(active)
    jets = []
    for i, c in enumerate(coords):
        c = np.asarray(c, dtype=np.float64)
        grad = np.zeros((n,) + c.shape)
        if i in active:
            grad[active.index(i)] = 1.0
        jets.append(Jet2(c, grad, np.zeros((n * (n + 1) // 2,) + c.shape)))
    return jets


def add(a, b) -> Jet2:
    if isinstance(a, Jet2) and isinstance(b, Jet2):
        return Jet2(a.value + b.value, a.grad + b.grad, a.hess + b.hess)
    if isinstance(b, Jet2):
        a, b = b, a
    return Jet2(a.value + b, a.grad, a.hess)


def neg(a):
    if not isinstance(a, Jet2):
        return -a
    return Jet2(-a.value, -a.grad, -a.hess)


def scale(a: Jet2, c) -> Jet2:
    return Jet2(a.value * c, a.grad * c, a.hess * c)


def mul(a, b) -> Jet2:
    if not isinstance(a, Jet2):
        a, b = b, a
    if not isinstance(b, Jet2):
        return scale(a, b)
    rows, cols = tri_pairs(a.n)
    ga, gb = a.grad, b.grad
    cross = ad.getitem(ga, rows) * ad.getitem(gb, cols) + ad.getitem(ga, cols) * ad.getitem(gb, rows)
    return Jet2(
        a.value * b.value,
        a.value * gb + b.value * ga,
        a.value * b.hess + b.value * a.hess + cross,
    )


def chain(a: Jet2, f0, f1, f2) -> Jet2:
    """Compose a scalar function with derivatives (f, f', f'') onto a jet."""
    rows, cols = tri_pairs(a.n)
    g = a.grad
    outer = ad.getitem(g, rows) * ad.getitem(g, cols)
    return Jet2(f0, f1 * g, f2 * outer + f1 * a.hess)


def _check(op, mask, a):
    if np.any(mask):
        idx, v = _first_bad(mask, ad.value(a.value))
        raise DerivativeDomainError(op, idx, v)


def reciprocal(a: Jet2) -> Jet2:
    _check("div", np.asarray(ad.value(a.value)) == 0.0, a)
    r = 1.0 / a.value
    r2 = r * r
    return chain(a, r, -r2, 2.0 * r2 * r)


def div(a, b) -> Jet2:
    if isinstance(b, Jet2):
        return mul(a, reciprocal(b))
    if np.any(np.asarray(ad.value(b)) == 0.0):
        raise DerivativeDomainError("div", (), 0.0)
    return scale(a, 1.0 / b)


def tanh(a: Jet2) -> Jet2:
    t = ad.tanh(a.value)
    d1 = 1.0 - t * t
    return chain(a, t, d1, -2.0 * t * d1)


def sin(a: Jet2) -> Jet2:
    s, c = ad.sin(a.value), ad.cos(a.value)
    return chain(a, s, c, -s)


def cos(a: Jet2) -> Jet2:
    s, c = ad.sin(a.value), ad.cos(a.value)
    return chain(a, c, -s, -c)


def exp(a: Jet2) -> Jet2:
    e = ad.exp(a.value)
    return chain(a, e, e, e)


def log(a: Jet2) -> Jet2:
    _check("log", np.asarray(ad.value(a.value)) <= 0.0, a)
    r = 1.0 / a.value
    return chain(a, ad.log(a.value), r, -(r * r))


def softplus(a: Jet2) -> Jet2:
    s = ad.sigmoid(a.value)
    return chain(a, ad.softplus(a.value), s, s * (1.0 - s))


def power(a: Jet2, p) -> Jet2:
    """``a ** p``; ``p`` may be a constant or a jet (then ``exp(p log a)``)."""
    if isinstance(p, Jet2):
        return exp(mul(p, log(a)))
    p = float(p)
    if p == 0.0:
        return Jet2.constant(np.ones_like(ad.value(a.value)), a.n)
    if p == 1.0:
        return a
    if p == 2.0:
        return mul(a, a)
    if not p.is_integer():
        _check("pow", np.asarray(ad.value(a.value)) <= 0.0, a)
    elif p < 0:
        _check("pow", np.asarray(ad.value(a.value)) == 0.0, a)
    v = a.value
    return chain(a, ad.power(v, p), p * ad.power(v, p - 1), p * (p - 1) * ad.power(v, p - 2))


def clamp_min(a: Jet2, floor: float) -> Jet2:
    """``max(a, floor)``: where the floor is active the jet is constant."""
    keep = (np.asarray(ad.value(a.value)) >= floor).astype(np.float64)
    return Jet2(ad.clamp_min(a.value, floor), a.grad * keep, a.hess * keep)


_UNARY = {"tanh": tanh, "sin": sin, "cos": cos, "exp": exp, "log": log, "softplus": softplus}
_BINARY = {"add": add, "mul": mul, "div": div, "pow": power}


def jet_arith(a, b, op: str) -> Jet2:
    """Apply a named primitive; ``b`` is ignored for unary ops."""
    if op in _UNARY:
        return _UNARY[op](a)
    if op in _BINARY:
        return _BINARY[op](a, b)
    raise ValueError(f"unknown jet op {op!r}")


# -- stacked layer primitives --------------------------------------------
#
# Inside a coordinate network the jets of a whole hidden layer are kept as one
# array of shape (C, B, width) with channel 0 the value, channels 1..n the
# gradient and the remaining m channels the Hessian triangle. The two
# primitives below are single tape nodes with hand-written adjoints.

def channels(n: int) -> int:
    return 1 + n + n * (n + 1) // 2


def stacked_affine(z, w, b):
    """``z @ w`` on every channel, bias added to the value channel only."""
    zv, wv, bv = ad.value(z), ad.value(w), ad.value(b)
    out = np.empty(zv.shape[:-1] + (wv.shape[1],))
    out[0] = zv[0] @ wv + bv
    if zv.shape[0] > 1:
        out[1:] = zv[1:] @ wv
    parents = [x for x in (z, w, b) if isinstance(x, Var)]
    if not parents:
        return out

    def vjp(g):
        res = []
        if isinstance(z, Var):
            res.append(g @ wv.T)
        if isinstance(w, Var):
            k = zv.shape[-1]
            res.append(zv.reshape(-1, k).T @ g.reshape(-1, wv.shape[1]))
        if isinstance(b, Var):
            res.append(g[0].sum(axis=0))
        return res

    return parents[0].tape.record("stacked_affine", out, parents, vjp)


_KINDS = {"tanh": 0, "sin": 1}


def stacked_activation(z, n: int, kind: str = "tanh"):
    """Elementwise activation pushed through a stacked jet to second order."""
    if kind not in _KINDS:
        raise ValueError(f"unknown activation {kind!r}")
    code = _KINDS[kind]
    zv = ad.value(z)
    shape = zv.shape
    flat = np.ascontiguousarray(zv).reshape(shape[0], -1)
    rows, cols = tri_pairs(n) if n else (np.zeros(0, np.intp), np.zeros(0, np.intp))
    if code == 0:
        a = np.tanh(flat[0])
        b = a
    else:
        a, b = np.sin(flat[0]), np.cos(flat[0])
    if n == 2:
        out = _kernels.activation_forward2(flat, a, b, code)
    else:
        out = _kernels.activation_forward(flat, a, b, n, rows, cols, code)
    out = out.reshape(shape)
    if not isinstance(z, Var):
        return out

    def vjp(g):
        g = np.ascontiguousarray(g).reshape(shape[0], -1)
        if n == 2:
            res = _kernels.activation_adjoint2(flat, a, b, g, code)
        else:
            res = _kernels.activation_adjoint(flat, a, b, g, n, rows, cols, code)
        return (res.reshape(shape),)

    return z.tape.record(f"stacked_{kind}", out, (z,), vjp)


def unstack(z, n: int) -> Jet2:
    """Split a stacked array of shape (C, ...) into a :class:`Jet2`."""
    return Jet2(ad.getitem(z, 0), ad.getitem(z, slice(1, 1 + n)), ad.getitem(z, slice(1 + n, None)))
