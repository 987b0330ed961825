"""Finite-difference verification of jets."""
from __future__ import annotations

import numpy as np

from .jet import Jet2, seed_inputs


def relative_error(approx, exact, floor: float = 1e-3) -> np.ndarray:
    """Componentwise ``|approx - exact| / |exact|``.

    Components much smaller than the largest one are measured against
    ``floor * max|exact|`` instead, so that near-zero entries do not turn
    round-off into huge relative errors. All-zero references fall back to
    the absolute error.
    """
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    big = np.max(np.abs(exact)) if exact.size else 0.0
    denom = np.maximum(np.abs(exact), floor * big)
    denom = np.where(denom > 0.0, denom, 1.0)
    return np.abs(approx - exact) / denom


def fd_derivatives(f, point, h: float, active=None):
    """Central-difference gradient and Hessian of the scalar field ``f``.

    The gradient differences field values; the Hessian differences the
    jet gradients at ``x +/- h e_j`` (second-order accurate, and it avoids
    the ``eps / h**2`` round-off of a three-point second difference).
    """
    point = np.asarray(point, dtype=np.float64)
    active = list(range(len(point))) if active is None else list(active)
    n = len(active)

    def at(x):
        return f(seed_inputs(list(x), active))

    grad = np.empty(n)
    hess = np.empty((n, n))
    for a, i in enumerate(active):
        xp, xm = point.copy(), point.copy()
        xp[i] += h
        xm[i] -= h
        jp, jm = at(xp), at(xm)
        grad[a] = (float(np.asarray(jp.value)) - float(np.asarray(jm.value))) / (2.0 * h)
        hess[:, a] = (np.asarray(jp.grad, dtype=np.float64) - np.asarray(jm.grad, dtype=np.float64)) / (2.0 * h)
    hess = 0.5 * (hess + hess.T)
    return grad, hess


def check_fd(f, point, h: float = 1e-5, active=None) -> dict:
    """Compare the jet of ``f`` at ``point`` against central differences.

    ``f`` maps a list of seeded input jets to one output :class:`Jet2`.
    Returns the jet derivatives, the finite-difference estimates and the
    maximum relative errors of gradient and Hessian.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    point = np.asarray(point, dtype=np.float64)
    active = list(range(len(point))) if active is None else list(active)
    jet: Jet2 = f(seed_inputs(list(point), active))
    grad = np.asarray(jet.grad, dtype=np.float64).reshape(-1)
    hess = jet.numpy().hessian().reshape(len(active), len(active))
    fd_grad, fd_hess = fd_derivatives(f, point, h, active)
    grad_err = relative_error(grad, fd_grad)
    hess_err = relative_error(hess, fd_hess)
    return {
        "grad": grad,
        "hess": hess,
        "fd_grad": fd_grad,
        "fd_hess": fd_hess,
        "grad_rel_err": grad_err,
        "hess_rel_err": hess_err,
        "max_grad_rel_err": float(grad_err.max(initial=0.0)),
        "max_hess_rel_err": float(hess_err.max(initial=0.0)),
    }
