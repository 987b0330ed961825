"""Manufactured solutions and their forcing terms.

The forcing is derived symbolically with sympy straight from the
conservation-form equations (``div(rho u phi)``, ``div(Gamma grad phi)``,
``2 mu_t S:S``). None of this touches :mod:`ranspinn.physics`, which works in
advective form with expanded products; the two agree because both families
are divergence free.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

from .autodiff import jet as J
from .autodiff.jet import seed_inputs
from .physics import RESIDUALS, TurbConstants

FAMILIES = ("trig-vortex", "poly-channel")
S_RANGE = (1.0, 1.0e6)
S_REF = 4200.0

X, Y, S = sp.symbols("x y s", real=True)


def velocity_scale(s):
    """Amplitude g(s) of the manufactured velocity; g(4200) = 1."""
    return np.sqrt(np.asarray(s, dtype=np.float64) / S_REF)


def _family_fields(family: str) -> dict:
    g = sp.sqrt(S / S_REF)
    pi = sp.pi
    if family == "trig-vortex":
        return {
            "u": sp.sin(pi * X) * sp.cos(pi * Y) * g,
            "v": -sp.cos(pi * X) * sp.sin(pi * Y) * g,
            "p": sp.Rational(1, 4) * (sp.cos(2 * pi * X) + sp.cos(2 * pi * Y)),
            "k": sp.Rational(1, 10) + sp.Rational(1, 20) * sp.sin(pi * X) * sp.sin(pi * Y),
            "eps": sp.exp(sp.Rational(1, 2) + sp.Rational(3, 10) * sp.cos(pi * X)),
        }
    if family == "poly-channel":
        return {
            "u": g * (1 - 4 * Y ** 2),
            "v": sp.Integer(0) * X,
            "p": sp.Rational(1, 10) * (2 - X),
            "k": sp.Rational(1, 20) + sp.Rational(1, 10) * Y ** 2 + sp.Rational(1, 50) * X,
            "eps": sp.Rational(1, 10) + sp.Rational(1, 5) * Y ** 2 + sp.Rational(1, 20) * X * (1 + Y),
        }
    raise ValueError(f"unknown MMS family {family!r}; expected one of {FAMILIES}")


FAMILY_BOUNDS = {
    "trig-vortex": [[0.0, 1.0], [0.0, 1.0]],
    "poly-channel": [[0.0, 2.0], [-0.5, 0.5]],
}

# Edge -> boundary tag. Inlet/outlet/wall are Dirichlet on the analytic values;
# symmetry edges of the vortex satisfy v = 0 and du/dy = 0 exactly.
FAMILY_EDGES = {
    "trig-vortex": {"left": "inlet", "right": "outlet", "bottom": "symmetry", "top": "symmetry"},
    "poly-channel": {"left": "inlet", "right": "outlet", "bottom": "wall", "top": "wall"},
}


def _family_jets(family: str, x, y, s) -> dict:
    """The same fields pushed through jet arithmetic (values + derivatives)."""
    xj, yj = seed_inputs([x, y], [0, 1])
    g = float(velocity_scale(s))
    pi = np.pi
    if family == "trig-vortex":
        sx, cx = J.sin(pi * xj), J.cos(pi * xj)
        sy, cy = J.sin(pi * yj), J.cos(pi * yj)
        return {
            "u": sx * cy * g,
            "v": -(cx * sy) * g,
            "p": (J.cos(2 * pi * xj) + J.cos(2 * pi * yj)) * 0.25,
            "k": sx * sy * 0.05 + 0.1,
            "eps": J.exp(cx * 0.3 + 0.5),
        }
    y2 = yj * yj
    return {
        "u": (1.0 - 4.0 * y2) * g,
        "v": xj * 0.0,
        "p": (2.0 - xj) * 0.1,
        "k": 0.05 + y2 * 0.1 + xj * 0.02,
        "eps": 0.1 + y2 * 0.2 + xj * (1.0 + yj) * 0.05,
    }


def _forcing_exprs(fields: dict, consts: TurbConstants) -> dict:
    u, v, p, k, e = (fields[n] for n in ("u", "v", "p", "k", "eps"))
    rho = sp.Integer(1)
    mu = 1 / S
    mu_t = sp.Float(consts.c_mu) * k ** 2 / e

    def div(fx, fy):
        return sp.diff(fx, X) + sp.diff(fy, Y)

    def diffusive(gamma, phi):
        return div(gamma * sp.diff(phi, X), gamma * sp.diff(phi, Y))

    def lap(phi):
        return sp.diff(phi, X, 2) + sp.diff(phi, Y, 2)

    grad_u = sp.Matrix([[sp.diff(u, X), sp.diff(u, Y)], [sp.diff(v, X), sp.diff(v, Y)]])
    strain = (grad_u + grad_u.T) / 2
    production = 2 * mu_t * sum(strain[i, j] ** 2 for i in range(2) for j in range(2))

    mu_eff = mu + mu_t
    f_momx = rho * (u * sp.diff(u, X) + v * sp.diff(u, Y)) + sp.diff(p, X) - mu_eff * lap(u)
    f_momy = rho * (u * sp.diff(v, X) + v * sp.diff(v, Y)) + sp.diff(p, Y) - mu_eff * lap(v)
    f_k = div(rho * u * k, rho * v * k) - diffusive(mu + mu_t / consts.sigma_k, k) - production + e
    sign = 1 if consts.eps_destruction_sign == "paper" else -1
    f_eps = (div(rho * u * e, rho * v * e) - diffusive(mu + mu_t / consts.sigma_eps, e)
             - (consts.c1 * production + sign * consts.c2 * rho * e) * e / k)
    return {"r_cont": div(u, v), "r_mom_x": f_momx, "r_mom_y": f_momy, "r_k": f_k, "r_eps": f_eps}


def _lambdify(expr):
    fn = sp.lambdify((X, Y, S), expr, modules="numpy")

    def call(x, y, s):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = fn(x, y, float(s))
        return np.broadcast_to(np.asarray(out, dtype=np.float64), np.broadcast(x, y).shape).copy()

    return call


@lru_cache(maxsize=None)
def _compiled(family: str, consts: TurbConstants):
    fields = _family_fields(family)
    forcing = _forcing_exprs(fields, consts)
    return ({n: _lambdify(ex) for n, ex in fields.items()},
            {n: _lambdify(ex) for n, ex in forcing.items()})


@dataclass
class MmsCase:
    """Closed-form fields and forcing for one family at one parameter value."""

    family: str
    s: float
    consts: TurbConstants = field(default_factory=TurbConstants)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown MMS family {self.family!r}; expected one of {FAMILIES}")
        if not (S_RANGE[0] <= self.s <= S_RANGE[1]):
            raise ValueError(f"s={self.s} outside the supported range {S_RANGE}")
        self.s = float(self.s)

    @property
    def bounds(self):
        return FAMILY_BOUNDS[self.family]

    @property
    def edges(self):
        return FAMILY_EDGES[self.family]

    @property
    def mu(self) -> float:
        return 1.0 / self.s

    def fields(self, x, y) -> dict:
        fns, _ = _compiled(self.family, self.consts)
        return {n: fn(x, y, self.s) for n, fn in fns.items()}

    def jets(self, x, y) -> dict:
        """Analytic fields as :class:`Jet2` over (x, y)."""
        return _family_jets(self.family, x, y, self.s)

    def forcing(self, x, y) -> dict:
        _, fns = _compiled(self.family, self.consts)
        return {n: fns[n](x, y, self.s) for n in RESIDUALS}
