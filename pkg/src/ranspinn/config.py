"""YAML run configuration: networks, training, constants and cases.

A run config looks like::

    seed: 0
    network: {widths: [32, 32, 32], n_freq: 6}
    training: {pretrain_steps: 1000, main_steps: 6000, batch_data: 256}
    physics: {eps_destruction_sign: standard}
    cases:
      - mms: {family: trig-vortex, s: 5600}
      - csv: cases/s2800/field.csv
        re: 2800
        mms_forcing: {family: trig-vortex, s: 2800}
    evaluate: [3140, 5700]

Relative paths resolve against the config file's directory. The single
``seed`` feeds network init, point splits and batch draws.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .data import CaseDataset, Geometry, load_csv, make_mms_case, mms_validation_cloud
from .mms import MmsCase
from .network import NetworkConfig
from .physics import RefScales, TurbConstants
from .trainer import TRAIN_CONFIG_FIELDS, TrainConfig


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"seed", "network", "training", "physics", "cases", "evaluate", "name"}
_NET_KEYS = {"widths", "n_freq", "activation"}
_MMS_KEYS = {"family", "s", "n_data", "n_colloc", "n_cloud", "n_boundary"}
_CSV_KEYS = {"csv", "re", "scales", "validation", "geometry", "n_data", "n_colloc", "n_boundary", "mms_forcing"}


@dataclass
class RunConfig:
    seed: int = 0
    name: str = "run"
    network: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    physics: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)
    evaluate: list = field(default_factory=list)
    base_dir: str = "."

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form (paths as written, not resolved)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- derived objects ---------------------------------------------------
    def constants(self) -> TurbConstants:
        try:
            return TurbConstants(**self.physics)
        except TypeError as exc:
            raise ConfigError(f"physics: {exc}") from None

    def train_config(self) -> TrainConfig:
        unknown = set(self.training) - set(TRAIN_CONFIG_FIELDS) - {"seed"}
        if unknown:
            raise ConfigError(f"training: unknown keys {sorted(unknown)}")
        kw = dict(self.training)
        kw["seed"] = self.seed
        kw.setdefault("mode", "parametric-Re" if self.parametric else "fixed-Re")
        return TrainConfig(**kw)

    @property
    def parametric(self) -> bool:
        return self.training.get("mode") == "parametric-Re" or len(self.cases) > 1

    def network_config(self, datasets) -> NetworkConfig:
        unknown = set(self.network) - _NET_KEYS
        if unknown:
            raise ConfigError(f"network: unknown keys {sorted(unknown)}")
        lo = [min(ds.bounds[i][0] for ds in datasets) for i in range(2)]
        hi = [max(ds.bounds[i][1] for ds in datasets) for i in range(2)]
        mode = self.train_config().mode
        re_range = None
        if mode == "parametric-Re":
            res = [ds.re for ds in datasets]
            re_range = [min(res), max(res)] if max(res) > min(res) else [min(res) - 1.0, max(res) + 1.0]
        return NetworkConfig(seed=self.seed, mode=mode, bounds=[[lo[0], hi[0]], [lo[1], hi[1]]],
                             re_range=re_range, **self.network)

    def _path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def datasets(self) -> list[CaseDataset]:
        consts = self.constants()
        return [self._dataset(c, consts) for c in self.cases]

    def _dataset(self, spec: dict, consts) -> CaseDataset:
        if "mms" in spec:
            mms = dict(spec["mms"])
            unknown = set(mms) - _MMS_KEYS
            if unknown:
                raise ConfigError(f"mms case: unknown keys {sorted(unknown)}")
            family, s = mms.pop("family"), mms.pop("s")
            _, ds = make_mms_case(family, float(s), seed=self.seed, consts=consts, **mms)
            return ds
        if "csv" in spec:
            unknown = set(spec) - _CSV_KEYS
            if unknown:
                raise ConfigError(f"csv case: unknown keys {sorted(unknown)}")
            forcing_case = None
            if "mms_forcing" in spec:
                f = spec["mms_forcing"]
                forcing_case = MmsCase(f["family"], float(f["s"]), consts)
            geometry = Geometry(**spec["geometry"]) if "geometry" in spec else None
            val = self._path(spec["validation"]) if "validation" in spec else None
            kw = {k: spec[k] for k in ("n_data", "n_colloc", "n_boundary") if k in spec}
            return load_csv(self._path(spec["csv"]), RefScales(**spec.get("scales", {})), spec.get("re"),
                            seed=self.seed, validation_path=val, geometry=geometry,
                            forcing_case=forcing_case, **kw)
        raise ConfigError(f"case needs an 'mms' or 'csv' entry, got {sorted(spec)}")

    def eval_clouds(self, n: int = 3000):
        """(s, samples) for each ``evaluate`` value, drawn from the first case's MMS family."""
        family = None
        for c in self.cases:
            if "mms" in c:
                family = c["mms"]["family"]
            elif "mms_forcing" in c:
                family = c["mms_forcing"]["family"]
            if family:
                break
        if self.evaluate and family is None:
            raise ConfigError("evaluate values need an MMS family among the cases")
        return [(float(s), mms_validation_cloud(family, float(s), n, seed=self.seed + 1, consts=self.constants()))
                for s in self.evaluate]


def parse_config(raw: dict, base_dir=".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cases = raw.get("cases") or []
    if not cases:
        raise ConfigError("config lists no cases")
    for c in cases:
        if not isinstance(c, dict):
            raise ConfigError(f"bad case entry {c!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    return RunConfig(seed=seed, name=str(raw.get("name", "run")), network=dict(raw.get("network") or {}),
                     training=dict(raw.get("training") or {}), physics=dict(raw.get("physics") or {}),
                     cases=list(cases), evaluate=list(raw.get("evaluate") or []), base_dir=str(base_dir))


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent)


def dump_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
    return path
