"""Data, boundary and PDE loss terms and their weighted sum.

    total = sum(data terms) + bc + lambda_mom*mom + lambda_cont*cont + lambda_k*k + lambda_eps*eps

Data and boundary terms carry unit weight. For eps the data term compares
log eps (the network's native output) against log of the data, and the PDE
term is ``mean(log(1 + r^2))``; both fall back to plain MSE when
``log_eps=False``.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .autodiff import tape as ad

DATA_TERMS = ("l_data_u", "l_data_v", "l_data_p", "l_data_k", "l_data_eps")
PDE_TERMS = ("l_mom", "l_cont", "l_k", "l_eps")
LAMBDA_DELTA = 1e-8


@dataclass
class LossWeights:
    lambda_mom: float = 1.0
    lambda_cont: float = 1.0
    lambda_k: float = 1.0
    lambda_eps: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{f.name} must be positive and finite, got {val}")

    def for_term(self, term: str) -> float:
        return getattr(self, "lambda_" + term[2:])

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    """Every loss term of one evaluation (PDE terms unweighted) plus the weights."""

    l_data_u: float = 0.0
    l_data_v: float = 0.0
    l_data_p: float = 0.0
    l_data_k: float = 0.0
    l_data_eps: float = 0.0
    l_bc: float = 0.0
    l_mom: float = 0.0
    l_cont: float = 0.0
    l_k: float = 0.0
    l_eps: float = 0.0
    total: float = 0.0
    weights: LossWeights = field(default_factory=LossWeights)
    pde_on: bool = True

    def weighted_sum(self) -> float:
        s = sum(getattr(self, t) for t in DATA_TERMS) + self.l_bc
        if self.pde_on:
            s += sum(self.weights.for_term(t) * getattr(self, t) for t in PDE_TERMS)
        return s

    def row(self) -> dict:
        out = {t: getattr(self, t) for t in DATA_TERMS + ("l_bc",) + PDE_TERMS + ("total",)}
        out.update(self.weights.as_dict())
        return out


CSV_COLUMNS = ("step", "phase", "lr") + DATA_TERMS + ("l_bc",) + PDE_TERMS + ("total",) + tuple(
    f.name for f in fields(LossWeights))


def write_curve_csv(path, rows) -> Path:
    """One row per logged step; floats in repr form so files are bit-stable."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], str) else repr(r[c]) for c in CSV_COLUMNS])
    return path


def read_curve_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {k: (v if k == "phase" else (int(v) if k == "step" else float(v))) for k, v in r.items()}
        out.append(d)
    return out


# -- terms ----------------------------------------------------------------------

def _mse(pred, target):
    d = pred - target
    return ad.mean(d * d)


def data_loss(pred: dict, samples, log_eps: bool = True) -> dict:
    """Per-variable MSE against field samples.

    ``pred`` holds u, v, p, k, eps and log_eps values (arrays or tape
    variables) at the sample points.
    """
    if len(samples) == 0:
        raise ValueError("data_loss on an empty batch")
    out = {}
    for name in ("u", "v", "p", "k"):
        out["l_data_" + name] = _mse(pred[name], getattr(samples, name))
    if log_eps:
        out["l_data_eps"] = _mse(pred["log_eps"], np.log(samples.eps))
    else:
        out["l_data_eps"] = _mse(pred["eps"], samples.eps)
    return out


def bc_loss(jets: dict, boundary):
    """Sum over boundary tags of the mean squared constraint violation.

    inlet, wall: (u - u_t)^2 + (v - v_t)^2; outlet: (p - p_t)^2;
    symmetry: (v - v_t)^2 + (du/dy)^2.
    """
    tags = np.asarray(boundary.tag)
    unknown = set(np.unique(tags)) - {"inlet", "outlet", "wall", "symmetry"}
    if unknown:
        raise ValueError(f"unknown boundary tag(s): {sorted(unknown)}")
    total = 0.0
    for tag in ("inlet", "outlet", "wall", "symmetry"):
        idx = np.flatnonzero(tags == tag)
        if len(idx) == 0:
            continue

        def val(name):
            return ad.getitem(jets[name].value, idx)

        if tag in ("inlet", "wall"):
            du = val("u") - boundary.u[idx]
            dv = val("v") - boundary.v[idx]
            term = ad.mean(du * du + dv * dv)
        elif tag == "outlet":
            dp = val("p") - boundary.p[idx]
            term = ad.mean(dp * dp)
        else:
            dv = val("v") - boundary.v[idx]
            dudy = ad.getitem(jets["u"].grad, (1, idx))
            term = ad.mean(dv * dv + dudy * dudy)
        total = total + term
    return total


def pde_terms(bundle, log_eps: bool = True) -> dict:
    """Unweighted PDE loss components from a residual bundle."""
    rx, ry = bundle.r_mom_x, bundle.r_mom_y
    if np.size(ad.value(bundle.r_cont)) == 0:
        raise ValueError("pde_loss on an empty batch")
    re = bundle.r_eps
    return {
        "l_mom": ad.mean(rx * rx + ry * ry),
        "l_cont": ad.mean(bundle.r_cont * bundle.r_cont),
        "l_k": ad.mean(bundle.r_k * bundle.r_k),
        "l_eps": ad.mean(ad.log1p(re * re)) if log_eps else ad.mean(re * re),
    }


def pde_loss(bundle, weights: LossWeights, log_eps: bool = True):
    """``(components, weighted total)``."""
    comps = pde_terms(bundle, log_eps)
    total = 0.0
    for t in PDE_TERMS:
        total = total + weights.for_term(t) * comps[t]
    return comps, total


def normalize_lambdas(means, delta: float = LAMBDA_DELTA) -> LossWeights:
    """Inverse-residual weights, rescaled so the largest is 1.

    ``means`` are the unweighted (mom, cont, k, eps) loss components over a
    calibration batch, as a sequence or a dict keyed like ``PDE_TERMS``.
    """
    if isinstance(means, dict):
        means = [means[t] for t in PDE_TERMS]
    m = np.asarray(means, dtype=np.float64)
    if m.shape != (4,) or not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValueError(f"need four finite nonnegative means, got {means}")
    lam = 1.0 / (m + delta)
    lam = lam / lam.max()
    return LossWeights(*(float(v) for v in lam))
