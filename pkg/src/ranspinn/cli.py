"""ranspinn command line: synth, train, eval, sweep.

Exit codes:
  0  success (converged or step budget used up)
  2  invalid arguments or configuration
  3  I/O failure or unreadable input data
  4  training aborted on a non-finite loss (partial artifacts kept)
  5  checkpoint does not match the case or config
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import report as R
from .config import ConfigError, RunConfig, load_config, parse_config
from .data import DataError, FieldSamples, mms_boundary, mms_cloud, write_field_csv
from .mms import FAMILIES, MmsCase
from .network import CheckpointError, FieldNetworkSet, load_checkpoint
from .trainer import ABLATIONS, Trainer, TrainingDiverged

OUT_ENV = "RANSPINN_OUT"
EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NAN, EXIT_MISMATCH = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


@dataclass
class RunManifest:
    command: str
    config_hash: str = ""
    seed: int = 0
    provenance: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    status: str = "running"
    summary: dict = field(default_factory=dict)

    def add(self, name, path):
        self.artifacts[name] = str(path)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def missing(self) -> list:
        return [p for p in self.artifacts.values() if not Path(p).exists()]


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime())


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def _prepare_out(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise CliError(f"{path} exists and is not empty (use --force to overwrite)", EXIT_ARGS)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(manifest: RunManifest, out_dir, status="ok"):
    manifest.status = status
    manifest.finished = _now()
    missing = manifest.missing()
    if missing and status == "ok":
        raise CliError(f"artifacts missing after run: {missing}", EXIT_IO)
    return manifest.write(out_dir)


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.training["workers"] = args.workers
    if getattr(args, "ablation", None) is not None:
        cfg.training["ablation"] = args.ablation
    return cfg


def _metrics_block(nets, clouds):
    """{label: metrics dict} over (label, samples, re) triples."""
    return {label: R.validation_errors(nets, cloud, re).to_dict() for label, cloud, re in clouds}


# -- synth -----------------------------------------------------------------------

def _s_values(args):
    if args.s is not None and args.s_range is not None:
        raise CliError("give either --s or --s-range, not both", EXIT_ARGS)
    if args.s is not None:
        return [float(s) for s in args.s]
    if args.s_range is not None:
        lo, hi = args.s_range
        if args.n < 1 or (args.n == 1 and lo != hi):
            raise CliError("--n must be >= 2 for a range", EXIT_ARGS)
        return [float(s) for s in np.linspace(lo, hi, args.n)]
    raise CliError("need --s or --s-range", EXIT_ARGS)


def cmd_synth(args) -> int:
    svals = _s_values(args)
    cases = [MmsCase(args.family, s) for s in svals]
    out = _prepare_out(args.out or _out_root() / f"synth-{args.family}", args.force)
    man = RunManifest("synth", seed=args.seed, started=_now())
    entries = []
    for i, case in enumerate(cases):
        tag = f"s{case.s:g}"
        cdir = out / f"{args.family}_{tag}"
        cdir.mkdir(exist_ok=True)
        ss = np.random.SeedSequence([args.seed, i]).spawn(2)
        cloud = mms_cloud(case, args.n_points, ss[0])
        bnd = mms_boundary(case, args.n_boundary, ss[1])
        f = case.fields(bnd.x, bnd.y)
        # boundary rows carry the full analytic state; targets are derived on load
        bnd = bnd.with_values(u=f["u"], v=f["v"], p=f["p"], k=f["k"], eps=f["eps"])
        path = write_field_csv(cdir / "field.csv", FieldSamples.concat([cloud, bnd]), re=case.s)
        man.add(f"{tag}/field", path)
        entries.append({"csv": str(path.relative_to(out)), "re": case.s,
                        "mms_forcing": {"family": args.family, "s": case.s}})
    run = {"name": f"{args.family}", "seed": args.seed, "cases": entries,
           "training": {"mode": "parametric-Re" if len(entries) > 1 else "fixed-Re"}}
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(run, sort_keys=True), encoding="utf-8")
    man.add("config", cfg_path)
    man.config_hash = parse_config(run, out).hash()
    man.provenance = [f"mms:{args.family}:s={c.s:g}" for c in cases]
    man.summary = {"cases": len(cases)}
    _finish(man, out)
    print(f"synth: {len(cases)} case(s) -> {out}")
    return EXIT_OK


# -- train / sweep -------------------------------------------------------------------

def _train(args, sweep: bool) -> int:
    cfg = _load_run_config(args)
    datasets = cfg.datasets()
    tcfg = cfg.train_config()
    if sweep and tcfg.mode != "parametric-Re":
        raise CliError("sweep needs a parametric config (several cases)", EXIT_ARGS)
    nets = FieldNetworkSet.init(cfg.network_config(datasets))
    default = _out_root() / f"{cfg.name}-{cfg.hash()[:10]}"
    out = _prepare_out(args.out or default, args.force)
    man = RunManifest("sweep" if sweep else "train", cfg.hash(), cfg.seed, started=_now(),
                      provenance=[f"{ds.provenance}:re={ds.re:g}" for ds in datasets])
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
    man.add("config", out / "config.yaml")
    tr = Trainer(nets, datasets, tcfg, cfg.constants())
    status = "ok"
    try:
        rep = tr.run()
    except TrainingDiverged as exc:
        rep = tr.report
        status = "diverged"
        print(f"training aborted: {exc}", file=sys.stderr)
    finally:
        tr.close()
    man.add("checkpoint", tr.save(out / "checkpoint.npz"))
    man.add("curve", rep.write_curve(out / "curve.csv"))
    if status == "ok":
        metrics = {"train": rep.validation, "lambdas": rep.lambdas, "converged": rep.converged,
                   "stop_reason": rep.stop_reason}
        if cfg.evaluate:
            metrics["evaluate"] = _metrics_block(nets, [(f"re={s!r}", c, s) for s, c in cfg.eval_clouds()])
        man.add("metrics", R.write_metrics(out / "metrics.json", metrics))
        man.summary = {"stop_reason": rep.stop_reason, "steps": len(rep.log), "wall_clock": rep.wall_clock}
    _finish(man, out, status)
    if status != "ok":
        return EXIT_NAN
    first = next(iter(rep.validation.values()), {})
    print(f"{man.command}: {rep.stop_reason}, rel_err_u={first.get('rel_err_u', float('nan')):.4g} -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    return _train(args, sweep=False)


def cmd_sweep(args) -> int:
    return _train(args, sweep=True)


# -- eval -------------------------------------------------------------------------

def _check_match(nets: FieldNetworkSet, extra: dict, datasets):
    cfg = nets.config
    for ds in datasets:
        for i, (lo, hi) in enumerate(ds.bounds):
            nlo, nhi = cfg.bounds[i]
            if lo < nlo - 1e-9 or hi > nhi + 1e-9:
                raise CliError(f"case bounds {ds.bounds} outside the network domain {cfg.bounds}", EXIT_MISMATCH)
    if cfg.mode == "fixed-Re" and "trainer" in extra:
        trained = {round(ds_re, 9) for ds_re in json.loads(str(extra.get("train_re", "[]")))}
        for ds in datasets:
            if trained and round(ds.re, 9) not in trained:
                raise CliError(f"fixed-Re checkpoint trained at Re={sorted(trained)} evaluated at {ds.re:g}",
                               EXIT_MISMATCH)


def cmd_eval(args) -> int:
    try:
        nets, extra = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from None
    cfg = _load_run_config(args)
    datasets = cfg.datasets()
    _check_match(nets, extra, datasets)
    out = _prepare_out(args.out or Path(args.checkpoint).parent / "eval", args.force)
    man = RunManifest("eval", cfg.hash(), cfg.seed, started=_now(),
                      provenance=[f"{ds.provenance}:re={ds.re:g}" for ds in datasets])
    clouds = [(f"re={ds.re!r}", ds.validation, ds.re) for ds in datasets]
    clouds += [(f"re={s!r}", c, s) for s, c in cfg.eval_clouds()]
    man.add("metrics", R.write_metrics(out / "metrics.json", _metrics_block(nets, clouds)))
    nx, ny = args.grid
    for label, cloud, re in clouds:
        tag = label.replace("re=", "re")
        for var in ("speed", "p"):
            g = R.field_grid(nets, var, nets.config.bounds, nx, ny, re=re)
            man.add(f"{tag}/{var}", R.export_grid(g, out / f"{tag}_{var}.csv", plot_script=args.plots))
        g = R.error_map(nets, cloud, "speed", nets.config.bounds, nx, ny, re=re)
        man.add(f"{tag}/error_speed", R.export_grid(g, out / f"{tag}_error_speed.csv", plot_script=args.plots))
    _finish(man, out)
    print(f"eval: {len(clouds)} case(s) -> {out / 'metrics.json'}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ranspinn",
        description="Physics-informed k-epsilon RANS surrogates.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"Outputs default to ${OUT_ENV} (currently {_out_root()}) when --out is not given.\n\n"
               + __doc__.split("\n", 1)[1],
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="run config (YAML)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--workers", type=int, help="threads for batch gradients (1 = reproducible reference)")
        sp.add_argument("--ablation", choices=ABLATIONS, help="loss ablation")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    s = sub.add_parser("synth", help="write manufactured-solution cases as CSV")
    s.add_argument("--family", choices=FAMILIES, required=True)
    s.add_argument("--s", type=float, nargs="+", help="parameter value(s)")
    s.add_argument("--s-range", type=float, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--n", type=int, default=6, help="number of values in --s-range")
    s.add_argument("--n-points", type=int, default=15000, help="interior points per case")
    s.add_argument("--n-boundary", type=int, default=100, help="points per boundary edge")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="pretrain then train on the configured case(s)")
    common(t)
    t.set_defaults(func=cmd_train)

    w = sub.add_parser("sweep", help="parametric training over several Re cases, then evaluate")
    common(w)
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", help="metrics, field grids and error maps for a checkpoint")
    common(e)
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--grid", type=int, nargs=2, default=list(R.GRID_DEFAULT), metavar=("NX", "NY"))
    e.add_argument("--plots", action="store_true", help="emit a matplotlib script next to each grid")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, DataError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
