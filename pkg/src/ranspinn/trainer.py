"""Two-phase training: data-only pretraining, then the combined loss.

Phase 1 takes Adam steps on the sum of the five per-variable data losses.
Each network's parameters appear in exactly one of those terms, and Adam is
elementwise, so this is the same as stepping every network on its own loss.

Phase 2 fixes the PDE weights from the residual magnitudes at entry
(optionally refreshing them every ``renormalize_every`` steps) and minimizes
data + boundary + weighted PDE terms on fresh random batches until the step
budget runs out or the smoothed loss stops moving.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import loss as L
from .autodiff import tape as ad
from .autodiff.tape import NonFiniteAdjointError, Tape
from .data import CaseDataset, FieldSamples
from .network import FieldNetworkSet, load_checkpoint, save_checkpoint
from .optim import AdamState, LrSchedule, NonFiniteGradientError, adam_step
from .physics import RESIDUALS, FluidProps, TurbConstants, residuals
from .report import validation_errors

ABLATIONS = ("none", "data-only", "no-log-eps")
PHASES = ("pretrain", "main")
_CALIB_CHUNK = 4096


class TrainingDiverged(FloatingPointError):
    """Non-finite loss or gradient; the networks hold the last good parameters."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class PhaseError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    pretrain_steps: int = 2000
    main_steps: int = 20000
    batch_data: int = 512
    batch_colloc: int = 512
    batch_boundary: int = 256
    lr0: float = 1e-3
    decay: float = 0.95
    decay_interval: int = 1000
    seed: int = 0
    mode: str = "fixed-Re"
    conv_window: int = 500
    conv_tol: float = 1e-4
    renormalize_every: int = 0
    ablation: str = "none"
    workers: int = 1
    log_every: int = 1

    def __post_init__(self):
        for name in ("pretrain_steps", "main_steps", "renormalize_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("batch_data", "batch_colloc", "batch_boundary", "conv_window", "workers", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode not in ("fixed-Re", "parametric-Re"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if not self.conv_tol >= 0:
            raise ValueError("conv_tol must be >= 0")
        LrSchedule(self.lr0, self.decay, self.decay_interval)

    @property
    def log_eps(self) -> bool:
        return self.ablation != "no-log-eps"

    @property
    def pde_on(self) -> bool:
        return self.ablation != "data-only"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    log: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    wall_clock: float = 0.0
    validation: dict = field(default_factory=dict)
    checkpoint_path: str | None = None
    converged: bool = False
    stop_reason: str = ""

    def curve(self, phase: str | None = None) -> list:
        return [r for r in self.log if phase is None or r["phase"] == phase]

    def write_curve(self, path) -> Path:
        return L.write_curve_csv(path, self.log)


# -- pooled point sets ---------------------------------------------------------------

@dataclass
class PointPool:
    """All cases' point sets concatenated, with each point's Re attached."""

    data: FieldSamples
    data_x: np.ndarray
    colloc_x: np.ndarray
    colloc_mu: np.ndarray
    forcing: dict
    boundary: FieldSamples
    bnd_x: np.ndarray
    rho: float = 1.0


def _with_re(xy, re):
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([xy, np.full(len(xy), float(re))])


def build_pool(datasets) -> PointPool:
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets")
    ref = datasets[0].scales
    for ds in datasets[1:]:
        if ds.scales != ref:
            raise ValueError(f"mismatched reference scales across cases: {ref} vs {ds.scales}")
    forcing = {n: [] for n in RESIDUALS}
    for ds in datasets:
        m = len(ds.collocation)
        for n in RESIDUALS:
            forcing[n].append(np.zeros(m) if ds.forcing is None else np.asarray(ds.forcing[n], dtype=np.float64))
    return PointPool(
        data=FieldSamples.concat([ds.data for ds in datasets]),
        data_x=np.concatenate([_with_re(ds.data.coords(), ds.re) for ds in datasets]),
        colloc_x=np.concatenate([_with_re(ds.collocation, ds.re) for ds in datasets]),
        colloc_mu=np.concatenate([np.full(len(ds.collocation), 1.0 / ds.re) for ds in datasets]),
        forcing={n: np.concatenate(v) for n, v in forcing.items()},
        boundary=FieldSamples.concat([ds.boundary for ds in datasets]),
        bnd_x=np.concatenate([_with_re(ds.boundary.coords(), ds.re) for ds in datasets]),
    )


def _draw(rng, size: int, n: int) -> np.ndarray:
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    if n >= size:
        return np.arange(size)
    return np.sort(rng.choice(size, n, replace=False))


def _chunks(idx, workers):
    return [c for c in np.array_split(idx, workers) if len(c)] or [idx]


# -- loss evaluation -------------------------------------------------------------------

def pde_bundle(nets, pool: PointPool, idx, consts, params=None):
    """Residual bundle (minus forcing) at pool collocation points ``idx``."""
    jets = nets.forward_jets(pool.colloc_x[idx], params)
    props = FluidProps(rho=pool.rho, mu=pool.colloc_mu[idx])
    forcing = {n: pool.forcing[n][idx] for n in RESIDUALS}
    return residuals(jets, props, consts, forcing)


def calibration_means(nets, pool: PointPool, consts, log_eps=True, chunk=_CALIB_CHUNK) -> dict:
    """Unweighted PDE loss components over every collocation point of the pool."""
    n = len(pool.colloc_x)
    if n == 0:
        raise ValueError("no collocation points to calibrate on")
    acc = dict.fromkeys(L.PDE_TERMS, 0.0)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        comps = L.pde_terms(pde_bundle(nets, pool, idx, consts), log_eps)
        for t in L.PDE_TERMS:
            acc[t] += float(comps[t]) * len(idx)
    return {t: v / n for t, v in acc.items()}


def _flat_grad(tape, root, leaves):
    grads = tape.gradient(root, leaves)
    return np.concatenate([g.ravel() for g in grads])


class Trainer:
    """Stateful driver for both phases; holds Adam moments, weights and RNG."""

    def __init__(self, nets: FieldNetworkSet, datasets, config: TrainConfig,
                 consts: TurbConstants = TurbConstants()):
        if isinstance(datasets, CaseDataset):
            datasets = [datasets]
        self.datasets = list(datasets)
        if config.mode != nets.config.mode:
            raise ValueError(f"training mode {config.mode} does not match network mode {nets.config.mode}")
        if config.mode == "fixed-Re" and len(self.datasets) != 1:
            raise ValueError("fixed-Re training takes exactly one dataset")
        self.nets = nets
        self.config = config
        self.consts = consts
        self.pool = build_pool(self.datasets)
        if len(self.pool.data) == 0:
            raise ValueError("dataset has no data points")
        # one stream for batches, independent of the network init stream
        self.rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
        self.schedule = LrSchedule(config.lr0, config.decay, config.decay_interval)
        self.adam = AdamState.zeros(nets.n_params)
        self.weights = L.LossWeights()
        self.phase = "pretrain"
        self.phase_step = 0
        self.pretrained = config.pretrain_steps == 0
        self.report = TrainReport()
        self._main_totals: list[float] = []
        self._pool_exec = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    # -- one evaluation ------------------------------------------------------
    def _chunk_loss(self, params_flat, d_idx, c_idx, b_idx, n_c_total, phase):
        """Loss contribution and flat gradient of one collocation chunk.

        The first chunk also carries the data and boundary terms. PDE means are
        scaled by ``len(chunk) / n_c_total`` so chunk sums give batch means.
        """
        cfg = self.config
        tape = Tape()
        leaves = [tape.var(a) for a in self.nets.unflatten(params_flat)]
        parts = {}
        total = 0.0
        if d_idx is not None:
            pred = self.nets.forward(self.pool.data_x[d_idx], leaves)
            terms = L.data_loss(pred, self.pool.data.subset(d_idx), cfg.log_eps)
            parts.update(terms)
            for t in L.DATA_TERMS:
                total = total + terms[t]
            if phase == "main" and cfg.pde_on and len(b_idx):
                jets = self.nets.forward_jets(self.pool.bnd_x[b_idx], leaves)
                parts["l_bc"] = L.bc_loss(jets, self.pool.boundary.subset(b_idx))
                total = total + parts["l_bc"]
        if c_idx is not None:
            bundle = pde_bundle(self.nets, self.pool, c_idx, self.consts, leaves)
            comps = L.pde_terms(bundle, cfg.log_eps)
            share = len(c_idx) / n_c_total
            for t in L.PDE_TERMS:
                parts[t] = comps[t] * share
                total = total + self.weights.for_term(t) * parts[t]
        values = {k: float(ad.value(v)) for k, v in parts.items()}
        total_val = float(ad.value(total))
        if not np.isfinite(total_val):
            raise TrainingDiverged(f"non-finite loss ({total_val}) at {phase} step {self.phase_step}")
        try:
            grad = _flat_grad(tape, total, leaves)
        except NonFiniteAdjointError as exc:
            raise TrainingDiverged(f"non-finite gradient at {phase} step {self.phase_step}: {exc}") from exc
        return total_val, values, grad

    def loss_and_grad(self, phase: str, d_idx, c_idx=None, b_idx=None, params_flat=None):
        """Batch loss breakdown and flat parameter gradient (ordered reduction)."""
        if params_flat is None:
            params_flat = self.nets.get_flat()
        with_pde = phase == "main" and self.config.pde_on and c_idx is not None and len(c_idx) > 0
        b_idx = np.zeros(0, dtype=np.int64) if b_idx is None else b_idx
        if not with_pde:
            results = [self._chunk_loss(params_flat, d_idx, None, b_idx, 1, phase)]
        else:
            chunks = _chunks(c_idx, self.config.workers)
            jobs = [(params_flat, d_idx if i == 0 else None, c, b_idx, len(c_idx), phase)
                    for i, c in enumerate(chunks)]
            if self._pool_exec is not None and len(jobs) > 1:
                results = list(self._pool_exec.map(lambda a: self._chunk_loss(*a), jobs))
            else:
                results = [self._chunk_loss(*a) for a in jobs]
        total, grad, values = 0.0, None, {}
        for t, v, g in results:
            total += t
            grad = g if grad is None else grad + g
            for k, x in v.items():
                values[k] = values.get(k, 0.0) + x
        br = L.LossBreakdown(**values, total=total, weights=self.weights, pde_on=with_pde)
        return br, grad

    # -- steps -----------------------------------------------------------------
    def _draw_batch(self, phase):
        cfg = self.config
        d = _draw(self.rng, len(self.pool.data), cfg.batch_data)
        if phase == "pretrain" or not cfg.pde_on:
            return d, None, None
        c = _draw(self.rng, len(self.pool.colloc_x), cfg.batch_colloc)
        b = _draw(self.rng, len(self.pool.boundary), cfg.batch_boundary)
        return d, c, b

    def step(self) -> L.LossBreakdown:
        """One Adam step in the current phase; logs the breakdown."""
        phase = self.phase
        flat = self.nets.get_flat()
        br, grad = self.loss_and_grad(phase, *self._draw_batch(phase), params_flat=flat)
        self._last_good = flat
        lr = self.schedule(self.phase_step)
        try:
            new = adam_step(flat, grad, self.adam, lr)
        except NonFiniteGradientError as exc:
            raise TrainingDiverged(str(exc)) from exc
        self.nets.set_flat(new)
        if self.phase_step % self.config.log_every == 0:
            row = {"step": self.phase_step, "phase": phase, "lr": lr}
            row.update(br.row())
            self.report.log.append(row)
        if phase == "main":
            self._main_totals.append(br.total)
        self.phase_step += 1
        return br

    def _run_steps(self, n) -> bool:
        """Up to ``n`` steps; on divergence restore the last parameters with a finite loss."""
        self._last_good = None
        try:
            for _ in range(n):
                self.step()
                if self.phase == "main" and self._converged():
                    return True
                every = self.config.renormalize_every
                if self.phase == "main" and self.config.pde_on and every and \
                        self.phase_step % every == 0 and self.phase_step < self.config.main_steps:
                    self.calibrate()
        except TrainingDiverged as exc:
            if self._last_good is not None:
                self.nets.set_flat(self._last_good)
            self.report.stop_reason = "diverged"
            exc.report = self.report
            raise
        return False

    # -- phases ------------------------------------------------------------------
    def pretrain(self) -> FieldNetworkSet:
        if self.phase != "pretrain":
            raise PhaseError("pretraining already finished")
        t0 = time.perf_counter()
        self._run_steps(self.config.pretrain_steps - self.phase_step)
        self.report.wall_clock += time.perf_counter() - t0
        self.pretrained = True
        return self.nets

    def calibrate(self) -> L.LossWeights:
        """Inverse-residual PDE weights from the full collocation set."""
        means = calibration_means(self.nets, self.pool, self.consts, self.config.log_eps)
        if not all(np.isfinite(v) for v in means.values()):
            self.report.stop_reason = "diverged"
            raise TrainingDiverged(f"non-finite PDE residuals at calibration: {means}", self.report)
        self.weights = L.normalize_lambdas(means)
        self.report.lambdas.append({"step": self.phase_step, **self.weights.as_dict()})
        return self.weights

    def start_main(self):
        if not self.pretrained:
            raise PhaseError("pretraining not completed (set pretrain_steps=0 to skip it)")
        self.phase = "main"
        self.phase_step = 0
        self.adam = AdamState.zeros(self.nets.n_params)
        self._main_totals = []
        if self.config.pde_on:
            self.calibrate()

    def train_full(self) -> TrainReport:
        t0 = time.perf_counter()
        if self.phase == "pretrain":
            self.start_main()
        converged = self._run_steps(self.config.main_steps - self.phase_step)
        self.report.wall_clock += time.perf_counter() - t0
        self.report.converged = bool(converged)
        self.report.stop_reason = "converged" if converged else "step budget"
        self.report.validation = self.validate()
        return self.report

    def run(self) -> TrainReport:
        if self.phase == "pretrain":
            self.pretrain()
        return self.train_full()

    def _converged(self) -> bool:
        w = self.config.conv_window
        h = self._main_totals
        if self.config.conv_tol == 0 or len(h) < 2 * w:
            return False
        recent = float(np.mean(h[-w:]))
        before = float(np.mean(h[-2 * w:-w]))
        return abs(recent - before) < self.config.conv_tol * abs(before)

    def validate(self) -> dict:
        out = {}
        for ds in self.datasets:
            if len(ds.validation):
                out[f"re={ds.re!r}"] = validation_errors(self.nets, ds.validation, ds.re).to_dict()
        return out

    # -- persistence -----------------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rng": self.rng.bit_generator.state,
            "phase": self.phase,
            "phase_step": self.phase_step,
            "pretrained": self.pretrained,
            "adam_step": self.adam.step,
            "weights": self.weights.as_dict(),
            "main_totals": self._main_totals,
            "log": self.report.log,
            "lambdas": self.report.lambdas,
        }

    def save(self, path) -> Path:
        extra = {"trainer": json.dumps(self.state_dict(), sort_keys=True),
                 "train_re": json.dumps([float(ds.re) for ds in self.datasets]),
                 "adam_m": self.adam.m, "adam_v": self.adam.v}
        path = save_checkpoint(path, self.nets, extra)
        self.report.checkpoint_path = str(path)
        return path

    @classmethod
    def resume(cls, path, datasets, consts: TurbConstants = TurbConstants(), config: TrainConfig | None = None):
        nets, extra = load_checkpoint(path)
        if "trainer" not in extra:
            raise ValueError(f"{path} holds no trainer state")
        state = json.loads(str(extra["trainer"]))
        cfg = config or TrainConfig(**state["config"])
        tr = cls(nets, datasets, cfg, consts)
        tr.rng.bit_generator.state = state["rng"]
        tr.phase = state["phase"]
        tr.phase_step = state["phase_step"]
        tr.pretrained = state["pretrained"]
        tr.adam = AdamState(extra["adam_m"].astype(np.float64), extra["adam_v"].astype(np.float64),
                            step=state["adam_step"])
        tr.weights = L.LossWeights(**state["weights"])
        tr._main_totals = list(state["main_totals"])
        tr.report.log = state["log"]
        tr.report.lambdas = state["lambdas"]
        tr.report.checkpoint_path = str(path)
        return tr

    def close(self):
        if self._pool_exec is not None:
            self._pool_exec.shutdown()
            self._pool_exec = None


# -- functional entry points -----------------------------------------------------------

def pretrain(nets, dataset, config: TrainConfig, consts: TurbConstants = TurbConstants()):
    tr = Trainer(nets, dataset, config, consts)
    try:
        return tr.pretrain()
    finally:
        tr.close()


def train_full(nets, dataset, config: TrainConfig, consts: TurbConstants = TurbConstants(),
               pretrained: bool = False) -> TrainReport:
    """Main phase only. ``pretrained`` asserts the caller already ran :func:`pretrain`."""
    tr = Trainer(nets, dataset, config, consts)
    tr.pretrained = tr.pretrained or pretrained
    try:
        return tr.train_full()
    finally:
        tr.close()


def train(nets, dataset, config: TrainConfig, consts: TurbConstants = TurbConstants()) -> TrainReport:
    """Both phases back to back."""
    tr = Trainer(nets, dataset, config, consts)
    try:
        return tr.run()
    finally:
        tr.close()


def train_parametric(nets, datasets, config: TrainConfig, consts: TurbConstants = TurbConstants()) -> TrainReport:
    """Both phases over several Re cases pooled into one point set."""
    datasets = list(datasets)
    if config.mode != "parametric-Re":
        raise ValueError("train_parametric needs mode='parametric-Re'")
    if len(datasets) < 2:
        raise ValueError("parametric training needs at least two cases")
    return train(nets, datasets, config, consts)


def parametric_re_range(datasets) -> list:
    res = [float(ds.re) for ds in datasets]
    return [min(res), max(res)]


TRAIN_CONFIG_FIELDS = tuple(f.name for f in fields(TrainConfig))
