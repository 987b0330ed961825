"""Compiled loops for the stacked activation jet (forward and adjoint).

Arrays are flattened to (channels, elements). Transcendentals are evaluated
by numpy beforehand (``a = tanh(z0)`` for tanh, ``a, b = sin, cos`` for
sin); the loops only do the chain-rule algebra. ``kind`` 0 is tanh, 1 is sin.
"""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _derivs(kind, a, b):
    if kind == 0:
        d1 = 1.0 - a * a
        return a, d1, -2.0 * a * d1, -2.0 * d1 * d1 + 4.0 * a * a * d1
    return a, b, -a, -b


@njit(cache=True, nogil=True)
def activation_forward(z, a, b, n, rows, cols, kind):
    out = np.empty_like(z)
    m = rows.shape[0]
    for e in range(z.shape[1]):
        f0, f1, f2, f3 = _derivs(kind, a[e], b[e])
        out[0, e] = f0
        for i in range(n):
            out[1 + i, e] = f1 * z[1 + i, e]
        for p in range(m):
            out[1 + n + p, e] = f2 * z[1 + rows[p], e] * z[1 + cols[p], e] + f1 * z[1 + n + p, e]
    return out


@njit(cache=True, nogil=True)
def activation_adjoint(z, a, b, g, n, rows, cols, kind):
    res = np.empty_like(z)
    m = rows.shape[0]
    for e in range(z.shape[1]):
        f0, f1, f2, f3 = _derivs(kind, a[e], b[e])
        acc = g[0, e] * f1
        for i in range(n):
            res[1 + i, e] = f1 * g[1 + i, e]
            acc += f2 * g[1 + i, e] * z[1 + i, e]
        for p in range(m):
            hp = g[1 + n + p, e]
            i = rows[p]
            j = cols[p]
            res[1 + n + p, e] = f1 * hp
            res[1 + i, e] += f2 * hp * z[1 + j, e]
            res[1 + j, e] += f2 * hp * z[1 + i, e]
            acc += hp * (f3 * z[1 + i, e] * z[1 + j, e] + f2 * z[1 + n + p, e])
        res[0, e] = acc
    return res


@njit(cache=True, nogil=True)
def activation_forward2(z, a, b, kind):
    out = np.empty_like(z)
    for e in range(z.shape[1]):
        f0, f1, f2, f3 = _derivs(kind, a[e], b[e])
        dx = z[1, e]
        dy = z[2, e]
        out[0, e] = f0
        out[1, e] = f1 * dx
        out[2, e] = f1 * dy
        out[3, e] = f2 * dx * dx + f1 * z[3, e]
        out[4, e] = f2 * dx * dy + f1 * z[4, e]
        out[5, e] = f2 * dy * dy + f1 * z[5, e]
    return out


@njit(cache=True, nogil=True)
def activation_adjoint2(z, a, b, g, kind):
    res = np.empty_like(z)
    for e in range(z.shape[1]):
        f0, f1, f2, f3 = _derivs(kind, a[e], b[e])
        dx = z[1, e]
        dy = z[2, e]
        gx = g[1, e]
        gy = g[2, e]
        hxx = g[3, e]
        hxy = g[4, e]
        hyy = g[5, e]
        res[3, e] = f1 * hxx
        res[4, e] = f1 * hxy
        res[5, e] = f1 * hyy
        res[1, e] = f1 * gx + f2 * (2.0 * hxx * dx + hxy * dy)
        res[2, e] = f1 * gy + f2 * (2.0 * hyy * dy + hxy * dx)
        res[0, e] = (g[0, e] * f1 + f2 * (gx * dx + gy * dy)
                     + f3 * (hxx * dx * dx + hxy * dx * dy + hyy * dy * dy)
                     + f2 * (hxx * z[3, e] + hxy * z[4, e] + hyy * z[5, e]))
    return res
