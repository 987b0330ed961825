"""Point-cloud field data: CSV ingestion, sampling, boundaries, MMS cases.

Samples are kept as a structure of arrays (:class:`FieldSamples`) rather
than one record per point. Boundary samples reuse the same container; fields
that a boundary tag does not constrain are NaN.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .mms import MmsCase
from .physics import RefScales, TurbConstants, denormalize, nondimensionalize

COLUMNS = ("x", "y", "u", "v", "p", "k", "eps")
VALUES = ("u", "v", "p", "k", "eps")
TAGS = ("interior", "inlet", "outlet", "wall", "symmetry")
EDGES = ("left", "right", "bottom", "top")
VALIDATION_FRACTION = 0.2


class DataError(ValueError):
    """Malformed or physically invalid field data."""


@dataclass
class FieldSamples:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    k: np.ndarray
    eps: np.ndarray
    tag: np.ndarray
    re: np.ndarray | None = None

    def __post_init__(self):
        for name in COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.tag = np.asarray(self.tag, dtype="<U8")
        if self.re is not None:
            self.re = np.asarray(self.re, dtype=np.float64)

    def __len__(self):
        return len(self.x)

    @classmethod
    def empty(cls) -> "FieldSamples":
        z = np.zeros(0)
        return cls(z, z, z, z, z, z, z, np.zeros(0, dtype="<U8"))

    @classmethod
    def concat(cls, parts) -> "FieldSamples":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        re = None
        if all(p.re is not None for p in parts):
            re = np.concatenate([p.re for p in parts])
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in COLUMNS),
                   np.concatenate([p.tag for p in parts]), re)

    def subset(self, idx) -> "FieldSamples":
        return FieldSamples(*(getattr(self, c)[idx] for c in COLUMNS), self.tag[idx],
                            None if self.re is None else self.re[idx])

    def coords(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def values(self) -> dict:
        return {c: getattr(self, c) for c in VALUES}

    def with_values(self, **vals) -> "FieldSamples":
        return replace(self, **vals)


@dataclass
class CaseDataset:
    """One flow case, nondimensional, split into the point sets used in training."""

    re: float
    scales: RefScales
    data: FieldSamples
    collocation: np.ndarray
    boundary: FieldSamples
    validation: FieldSamples
    provenance: str
    bounds: list
    forcing: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.collocation = np.asarray(self.collocation, dtype=np.float64).reshape(-1, 2)
        if self.provenance not in ("csv", "mms"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


# -- CSV -----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_field_csv(path, samples: FieldSamples, re: float | None = None, with_tag: bool = True) -> Path:
    """Write samples in the ingestion schema (full-precision decimal floats)."""
    path = Path(path)
    header = list(COLUMNS) + (["tag"] if with_tag else []) + (["Re"] if re is not None else [])
    cols = [getattr(samples, c) for c in COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(samples)):
            row = [_fmt(c[i]) for c in cols]
            if with_tag:
                row.append(str(samples.tag[i]))
            if re is not None:
                row.append(_fmt(re))
            w.writerow(row)
    return path


def read_field_csv(path) -> FieldSamples:
    """Parse and validate a field CSV (raw, dimensional units).

    Errors name the 1-based file line and the column.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in COLUMNS}
        tag_pos = header.index("tag") if "tag" in header else None
        re_pos = header.index("Re") if "Re" in header else None
        num_pos = [pos[c] for c in COLUMNS] + ([re_pos] if re_pos is not None else [])
        num_names = list(COLUMNS) + (["Re"] if re_pos is not None else [])
        rows, tags = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(row[j]) for j in num_pos]
            except ValueError:
                bad = next(n for n, j in zip(num_names, num_pos) if not _is_float(row[j]))
                raise DataError(f"{path}:{line_no}: column {bad!r} is not a number") from None
            rows.append(vals)
            tags.append(row[tag_pos].strip() if tag_pos is not None else "interior")
    arr = np.array(rows, dtype=np.float64).reshape(-1, len(num_pos))
    tag = np.array(tags, dtype="<U8")
    _validate(path, arr, num_names, tag)
    re = arr[:, len(COLUMNS)] if re_pos is not None else None
    return FieldSamples(*(arr[:, i] for i in range(len(COLUMNS))), tag, re)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _validate(path, arr, names, tag):
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"{path}:{r + 2}: non-finite value in column {names[c]!r}")
    unknown = ~np.isin(tag, TAGS)
    if unknown.any():
        r = int(np.argmax(unknown))
        raise DataError(f"{path}:{r + 2}: unknown tag {tag[r]!r}")
    k = arr[:, COLUMNS.index("k")]
    if (k < 0).any():
        r = int(np.argmax(k < 0))
        raise DataError(f"{path}:{r + 2}: negative k ({k[r]!r})")
    eps = arr[:, COLUMNS.index("eps")]
    bad_eps = (eps <= 0) & (tag == "interior")
    if bad_eps.any():
        r = int(np.argmax(bad_eps))
        raise DataError(f"{path}:{r + 2}: eps must be > 0 at interior points, got {eps[r]!r}")


# -- sampling -------------------------------------------------------------------

def sample_indices(size: int, n: int, seed) -> np.ndarray:
    if n > size:
        raise ValueError(f"cannot sample {n} points from a cloud of {size}")
    return np.random.default_rng(seed).choice(size, size=n, replace=False)


def sample_points(cloud, n: int, seed):
    """Uniform sample without replacement; mesh-dense regions stay dense."""
    idx = sample_indices(len(cloud), n, seed)
    return cloud.subset(idx) if isinstance(cloud, FieldSamples) else np.asarray(cloud)[idx]


def split_cloud(n_points: int, n_data: int, n_colloc: int, seed,
                validation_fraction: float = VALIDATION_FRACTION, holdout: bool = True):
    """Disjoint (validation, data, collocation) index sets over one cloud.

    Each draw uses its own child seed. Data and collocation are drawn from
    the points left after the validation holdout, and are disjoint from each
    other.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_val, s_data, s_col = ss.spawn(3)
    all_idx = np.arange(n_points)
    if holdout:
        n_val = int(round(validation_fraction * n_points))
        val = np.sort(sample_indices(n_points, n_val, s_val))
        pool = np.setdiff1d(all_idx, val, assume_unique=True)
    else:
        val = np.zeros(0, dtype=np.intp)
        pool = all_idx
    data = pool[sample_indices(len(pool), min(n_data, len(pool)), s_data)]
    rest = np.setdiff1d(pool, data)
    colloc = rest[sample_indices(len(rest), min(n_colloc, len(rest)), s_col)]
    return val, data, colloc


# -- boundaries -------------------------------------------------------------------

@dataclass
class Geometry:
    """Rectangle with tagged edges and an optional polygonal obstacle (wall)."""

    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0
    edges: dict = field(default_factory=lambda: {"left": "inlet", "right": "outlet",
                                                 "bottom": "symmetry", "top": "symmetry"})
    obstacle: list | None = None
    u_inlet: float = 1.0

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("degenerate geometry: empty rectangle")
        for edge, tag in self.edges.items():
            if edge not in EDGES or tag not in TAGS[1:]:
                raise ValueError(f"bad edge spec {edge!r}: {tag!r}")
        if self.obstacle is not None:
            poly = np.asarray(self.obstacle, dtype=np.float64)
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3 or abs(_polygon_area(poly)) <= 0:
                raise ValueError("degenerate geometry: obstacle must be a polygon with positive area")
            self.obstacle = poly.tolist()

    @property
    def bounds(self):
        return [[self.xmin, self.xmax], [self.ymin, self.ymax]]

    def contains(self, pts) -> np.ndarray:
        """True for points inside the fluid region (outside the obstacle)."""
        pts = np.atleast_2d(pts)
        inside_box = ((pts[:, 0] >= self.xmin) & (pts[:, 0] <= self.xmax)
                      & (pts[:, 1] >= self.ymin) & (pts[:, 1] <= self.ymax))
        if self.obstacle is None:
            return inside_box
        return inside_box & ~point_in_polygon(pts, np.asarray(self.obstacle))


def _polygon_area(poly) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def point_in_polygon(pts, poly) -> np.ndarray:
    """Even-odd ray casting."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def _targets(tag: str, n: int, u_inlet: float) -> dict:
    nan = np.full(n, np.nan)
    zero = np.zeros(n)
    if tag == "inlet":
        return {"u": np.full(n, u_inlet), "v": zero, "p": nan}
    if tag == "outlet":
        return {"u": nan, "v": nan, "p": zero}
    if tag == "wall":
        return {"u": zero, "v": zero, "p": nan}
    return {"u": nan, "v": zero, "p": nan}


def boundary_points(geometry: Geometry, n_per_boundary: int, seed) -> FieldSamples:
    """Random points on every tagged edge (and the obstacle), with BC targets.

    Inlet: (u, v) = (u_inlet, 0); outlet: p = 0; wall: (u, v) = 0; symmetry:
    v = 0 plus zero du/dy, which the tag itself encodes.
    """
    rng = np.random.default_rng(seed)
    g = geometry
    parts = []
    for edge in EDGES:
        tag = g.edges.get(edge)
        if tag is None:
            continue
        t = rng.uniform(0.0, 1.0, n_per_boundary)
        if edge in ("left", "right"):
            x = np.full(n_per_boundary, g.xmin if edge == "left" else g.xmax)
            y = g.ymin + t * (g.ymax - g.ymin)
        else:
            x = g.xmin + t * (g.xmax - g.xmin)
            y = np.full(n_per_boundary, g.ymin if edge == "bottom" else g.ymax)
        parts.append(_boundary_part(x, y, tag, g.u_inlet))
    if g.obstacle is not None:
        poly = np.asarray(g.obstacle)
        seg = np.roll(poly, -1, axis=0) - poly
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        s = rng.uniform(0.0, cum[-1], n_per_boundary)
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(poly) - 1)
        frac = (s - cum[i]) / lengths[i]
        pts = poly[i] + frac[:, None] * seg[i]
        parts.append(_boundary_part(pts[:, 0], pts[:, 1], "wall", g.u_inlet))
    return FieldSamples.concat(parts)


def _boundary_part(x, y, tag, u_inlet) -> FieldSamples:
    n = len(x)
    t = _targets(tag, n, u_inlet)
    nan = np.full(n, np.nan)
    return FieldSamples(x, y, t["u"], t["v"], t["p"], nan, nan, np.full(n, tag, dtype="<U8"))


def boundary_from_rows(rows: FieldSamples) -> FieldSamples:
    """Boundary targets taken from tagged CFD rows, masked by tag."""
    u, v, p = rows.u.copy(), rows.v.copy(), rows.p.copy()
    nan = np.nan
    outlet = rows.tag == "outlet"
    u[outlet] = nan
    v[outlet] = nan
    p[rows.tag != "outlet"] = nan
    sym = rows.tag == "symmetry"
    u[sym] = nan
    v[sym] = 0.0
    wall = rows.tag == "wall"
    u[wall] = 0.0
    v[wall] = 0.0
    n = len(rows)
    return FieldSamples(rows.x, rows.y, u, v, p, np.full(n, nan), np.full(n, nan), rows.tag)


# -- dataset builders ---------------------------------------------------------------

def load_csv(path, scales: RefScales = RefScales(), re: float | None = None, *,
             n_data: int = 3000, n_colloc: int = 3000, seed: int = 0,
             validation_path=None, geometry: Geometry | None = None,
             n_boundary: int = 100, forcing_case: MmsCase | None = None) -> CaseDataset:
    """Read a CFD point cloud and split it into the training point sets.

    Values are nondimensionalized with ``scales``. Without a separate
    validation file a disjoint random 20 % of the interior points is held
    out. Tagged boundary rows become boundary targets; otherwise, when a
    geometry is given, boundary points are generated on it.
    """
    raw = read_field_csv(path)
    cloud = _normalize(raw, scales)
    if re is None:
        if raw.re is None:
            raise DataError(f"{path}: Reynolds number not given and no Re column present")
        uniq = np.unique(raw.re)
        if len(uniq) != 1:
            raise DataError(f"{path}: Re column is not constant ({len(uniq)} distinct values)")
        re = float(uniq[0])
    interior = cloud.subset(np.flatnonzero(cloud.tag == "interior"))
    tagged = cloud.subset(np.flatnonzero(cloud.tag != "interior"))
    holdout = validation_path is None
    val_idx, data_idx, col_idx = split_cloud(len(interior), n_data, n_colloc, seed, holdout=holdout)
    if holdout:
        validation = interior.subset(val_idx)
    else:
        validation = _normalize(read_field_csv(validation_path), scales)
    if len(tagged):
        boundary = boundary_from_rows(tagged)
    elif geometry is not None:
        boundary = boundary_points(geometry, n_boundary, np.random.SeedSequence(seed).spawn(4)[3])
    else:
        boundary = FieldSamples.empty()
    colloc = interior.coords()[col_idx]
    bounds = geometry.bounds if geometry is not None else [
        [float(cloud.x.min()), float(cloud.x.max())], [float(cloud.y.min()), float(cloud.y.max())]]
    forcing = None
    if forcing_case is not None:
        forcing = forcing_case.forcing(colloc[:, 0], colloc[:, 1])
    return CaseDataset(re=float(re), scales=scales, data=interior.subset(data_idx), collocation=colloc,
                       boundary=boundary, validation=validation, provenance="csv", bounds=bounds,
                       forcing=forcing, meta={"path": str(path)})


def _normalize(raw: FieldSamples, scales: RefScales) -> FieldSamples:
    vals = nondimensionalize({c: getattr(raw, c) for c in COLUMNS}, scales)
    return FieldSamples(*(vals[c] for c in COLUMNS), raw.tag, raw.re)


def denormalize_samples(samples: FieldSamples, scales: RefScales) -> FieldSamples:
    vals = denormalize({c: getattr(samples, c) for c in COLUMNS}, scales)
    return FieldSamples(*(vals[c] for c in COLUMNS), samples.tag, samples.re)


def mms_cloud(case: MmsCase, n: int, seed) -> FieldSamples:
    """Uniform random interior points with exact field values."""
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = case.bounds
    x = rng.uniform(x0, x1, n)
    y = rng.uniform(y0, y1, n)
    f = case.fields(x, y)
    return FieldSamples(x, y, f["u"], f["v"], f["p"], f["k"], f["eps"], np.full(n, "interior"),
                        np.full(n, case.s))


def make_mms_case(family: str, s: float, *, n_data: int = 3000, n_colloc: int = 3000,
                  n_cloud: int = 15000, n_boundary: int = 100, seed: int = 0,
                  consts: TurbConstants = TurbConstants()) -> tuple[MmsCase, CaseDataset]:
    """Manufactured case plus a sampled dataset with exact values and forcing."""
    case = MmsCase(family, s, consts)
    s_cloud, s_split, s_bnd = np.random.SeedSequence(seed).spawn(3)
    cloud = mms_cloud(case, n_cloud, s_cloud)
    val_idx, data_idx, col_idx = split_cloud(n_cloud, n_data, n_colloc, s_split)
    boundary = mms_boundary(case, n_boundary, s_bnd)
    colloc = cloud.coords()[col_idx]
    ds = CaseDataset(
        re=case.s, scales=RefScales(), data=cloud.subset(data_idx), collocation=colloc,
        boundary=boundary, validation=cloud.subset(val_idx), provenance="mms", bounds=case.bounds,
        forcing=case.forcing(colloc[:, 0], colloc[:, 1]), meta={"family": family, "s": case.s},
    )
    return case, ds


def mms_boundary(case: MmsCase, n_per_boundary: int, seed) -> FieldSamples:
    """Boundary points whose Dirichlet targets are the analytic values."""
    (x0, x1), (y0, y1) = case.bounds
    geom = Geometry(x0, x1, y0, y1, edges=dict(case.edges))
    b = boundary_points(geom, n_per_boundary, seed)
    f = case.fields(b.x, b.y)
    u = np.where(np.isnan(b.u), np.nan, f["u"])
    v = np.where(np.isnan(b.v), np.nan, f["v"])
    p = np.where(np.isnan(b.p), np.nan, f["p"])
    return b.with_values(u=u, v=v, p=p)


def mms_validation_cloud(family: str, s: float, n: int, seed: int = 0,
                         consts: TurbConstants = TurbConstants()) -> FieldSamples:
    """Fresh evaluation points for an (unseen) parameter value."""
    return mms_cloud(MmsCase(family, s, consts), n, seed)
