"""Nondimensional steady RANS k-epsilon residuals evaluated from field jets.

All residuals are written as ``LHS - RHS`` of the transport equations in
advective form (continuity lets ``div(rho u phi)`` become ``rho u . grad phi``).
The momentum viscous term is ``mu_eff * laplacian(u)`` with a pointwise
``mu_eff``; this is the non-conservative form, not ``div(mu_eff (grad u +
grad u^T))``.

Every function accepts jets whose components are numpy arrays or tape
variables, so the same code serves evaluation and training.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import jet as J
from .autodiff import tape as ad
from .autodiff.jet import Jet2

SIGNS = ("standard", "paper")


@dataclass(frozen=True)
class FluidProps:
    rho: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        # mu may be a per-point array when several Re cases share a batch
        if not (self.rho > 0 and np.all(np.asarray(self.mu) > 0)):
            raise ValueError(f"rho and mu must be positive, got rho={self.rho}, mu={self.mu}")

    @classmethod
    def from_reynolds(cls, re: float, rho: float = 1.0) -> "FluidProps":
        """Nondimensional properties: unit density, viscosity 1/Re."""
        return cls(rho=rho, mu=1.0 / re)


@dataclass(frozen=True)
class TurbConstants:
    c_mu: float = 0.09
    c1: float = 1.44
    c2: float = 1.92
    sigma_k: float = 1.0
    sigma_eps: float = 1.3
    eps_floor: float = 1e-10
    eps_destruction_sign: str = "standard"

    def __post_init__(self):
        for name in ("c_mu", "c1", "c2", "sigma_k", "sigma_eps", "eps_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_destruction_sign not in SIGNS:
            raise ValueError(f"eps_destruction_sign must be one of {SIGNS}")


@dataclass(frozen=True)
class RefScales:
    """Characteristic length, inlet velocity and density of a case."""

    length: float = 1.0
    velocity: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not (self.length > 0 and self.velocity > 0 and self.rho > 0):
            raise ValueError("reference scales must be positive")

    @property
    def pressure(self) -> float:
        return self.rho * self.velocity ** 2

    @property
    def k(self) -> float:
        return self.velocity ** 2

    @property
    def eps(self) -> float:
        return self.velocity ** 3 / self.length

    def factors(self) -> dict:
        return {"x": self.length, "y": self.length, "u": self.velocity, "v": self.velocity,
                "p": self.pressure, "k": self.k, "eps": self.eps}


@dataclass
class ResidualBundle:
    r_cont: object
    r_mom_x: object
    r_mom_y: object
    r_k: object
    r_eps: object

    def numpy(self) -> "ResidualBundle":
        return ResidualBundle(*(np.asarray(ad.value(getattr(self, f))) for f in RESIDUALS))


RESIDUALS = ("r_cont", "r_mom_x", "r_mom_y", "r_k", "r_eps")


def reynolds(rho, u_inlet, length, mu) -> float:
    if min(rho, u_inlet, length, mu) <= 0:
        raise ValueError("Reynolds number needs positive rho, u_inlet, L and mu")
    return rho * u_inlet * length / mu


def eddy_viscosity(k, eps, consts: TurbConstants = TurbConstants(), mu=0.0):
    """``(mu_t, mu_eff)`` with ``mu_t = c_mu k^2 / max(eps, eps_floor)``.

    ``k`` and ``eps`` may be jets (the result is then a jet) or arrays.
    """
    if isinstance(k, Jet2) or isinstance(eps, Jet2):
        mu_t = (k * k) * consts.c_mu / J.clamp_min(eps, consts.eps_floor)
    else:
        mu_t = consts.c_mu * k * k / ad.clamp_min(eps, consts.eps_floor)
    return mu_t, mu_t + mu


# -- jet component helpers -------------------------------------------------

def _d(jet: Jet2, i: int):
    return ad.getitem(jet.grad, i)


def laplacian(jet: Jet2):
    n = jet.n
    return sum(ad.getitem(jet.hess, J.tri_index(i, i, n)) for i in range(n))


def _convect(jets, phi: Jet2, rho):
    return rho * (jets["u"].value * _d(phi, 0) + jets["v"].value * _d(phi, 1))


def _mu_t_value(jets, consts):
    k = jets["k"].value
    return consts.c_mu * k * k / ad.clamp_min(jets["eps"].value, consts.eps_floor)


def _mu_t_grad(jets, consts):
    """Gradient of mu_t (2, B); zero eps-dependence where the floor is active."""
    k, e = jets["k"], jets["eps"]
    ev = np.asarray(ad.value(e.value))
    active = (ev >= consts.eps_floor).astype(np.float64)
    et = ad.clamp_min(e.value, consts.eps_floor)
    a = 2.0 * consts.c_mu * k.value / et
    b = consts.c_mu * k.value * k.value / (et * et) * active
    return a * k.grad - b * e.grad


# -- residuals ---------------------------------------------------------------

def continuity_residual(jets):
    return _d(jets["u"], 0) + _d(jets["v"], 1)


def momentum_residual(jets, props: FluidProps, consts: TurbConstants = TurbConstants()):
    mu_eff = props.mu + _mu_t_value(jets, consts)
    u, v, p = jets["u"], jets["v"], jets["p"]
    r_x = _convect(jets, u, props.rho) + _d(p, 0) - mu_eff * laplacian(u)
    r_y = _convect(jets, v, props.rho) + _d(p, 1) - mu_eff * laplacian(v)
    return r_x, r_y


def production_terms(jets, consts: TurbConstants = TurbConstants(), mu_t=None):
    """Boussinesq production ``mu_t (2 u_x^2 + 2 v_y^2 + (u_y + v_x)^2)``; P_eps = P_k."""
    if mu_t is None:
        mu_t = _mu_t_value(jets, consts)
    ux, uy = _d(jets["u"], 0), _d(jets["u"], 1)
    vx, vy = _d(jets["v"], 0), _d(jets["v"], 1)
    shear = uy + vx
    p_k = mu_t * (2.0 * ux * ux + 2.0 * vy * vy + shear * shear)
    return p_k, p_k


def _diffusion(jets, phi: Jet2, mu, mu_t, grad_mu_t, sigma):
    gdot = ad.getitem(grad_mu_t, 0) * _d(phi, 0) + ad.getitem(grad_mu_t, 1) * _d(phi, 1)
    return (mu + mu_t * (1.0 / sigma)) * laplacian(phi) + gdot * (1.0 / sigma)


def k_residual(jets, props: FluidProps, consts: TurbConstants = TurbConstants()):
    mu_t = _mu_t_value(jets, consts)
    p_k, _ = production_terms(jets, consts, mu_t)
    k = jets["k"]
    diff = _diffusion(jets, k, props.mu, mu_t, _mu_t_grad(jets, consts), consts.sigma_k)
    return _convect(jets, k, props.rho) - diff - p_k + jets["eps"].value


def eps_residual(jets, props: FluidProps, consts: TurbConstants = TurbConstants()):
    mu_t = _mu_t_value(jets, consts)
    _, p_eps = production_terms(jets, consts, mu_t)
    e = jets["eps"]
    diff = _diffusion(jets, e, props.mu, mu_t, _mu_t_grad(jets, consts), consts.sigma_eps)
    destruction = consts.c2 * props.rho * e.value
    if consts.eps_destruction_sign == "standard":
        destruction = -destruction
    ratio = e.value / ad.clamp_min(jets["k"].value, consts.eps_floor)
    return _convect(jets, e, props.rho) - diff - (consts.c1 * p_eps + destruction) * ratio


def residuals(jets, props: FluidProps, consts: TurbConstants = TurbConstants(), forcing=None) -> ResidualBundle:
    """All five residuals, minus an optional manufactured forcing dict."""
    r_x, r_y = momentum_residual(jets, props, consts)
    out = {
        "r_cont": continuity_residual(jets),
        "r_mom_x": r_x,
        "r_mom_y": r_y,
        "r_k": k_residual(jets, props, consts),
        "r_eps": eps_residual(jets, props, consts),
    }
    if forcing is not None:
        out = {name: out[name] - forcing[name] for name in RESIDUALS}
    return ResidualBundle(**out)


# -- scaling -------------------------------------------------------------------

def nondimensionalize(fields: dict, scales: RefScales) -> dict:
    """Divide each known variable by its reference scale; unknown keys pass through."""
    f = scales.factors()
    return {name: (np.asarray(val, dtype=np.float64) / f[name] if name in f else val)
            for name, val in fields.items()}


def denormalize(fields: dict, scales: RefScales) -> dict:
    f = scales.factors()
    return {name: (np.asarray(val, dtype=np.float64) * f[name] if name in f else val)
            for name, val in fields.items()}
