"""Validation metrics, field grids and log-error maps."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

ERROR_MAP_DELTA = 1e-12
GRID_DEFAULT = (256, 128)
VARIABLES = ("u", "v", "p", "k", "eps")
_CHUNK = 8192


@dataclass
class ValidationMetrics:
    """Relative L2 error per variable over a validation cloud.

    Variables whose reference vector has zero norm are reported as absolute
    RMSE instead and listed in ``absolute``.
    """

    rel_err_u: float
    rel_err_v: float
    rel_err_p: float
    rel_err_k: float | None = None
    rel_err_eps: float | None = None
    n_points: int = 0
    absolute: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def relative_l2(pred, true) -> tuple[float, bool]:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    diff = float(np.linalg.norm(pred - true))
    ref = float(np.linalg.norm(true))
    if ref == 0.0:
        return diff / np.sqrt(max(true.size, 1)), True
    return diff / ref, False


def _inputs(x, y, re):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if re is None:
        re = np.zeros_like(x)
    return np.column_stack([x, y, np.broadcast_to(np.asarray(re, dtype=np.float64), x.shape)])


def predict(nets, x, y, re=None) -> dict:
    """Network fields at arbitrary points (evaluated in chunks)."""
    pts = _inputs(x, y, re)
    out = {f: np.empty(len(pts)) for f in VARIABLES}
    for start in range(0, len(pts), _CHUNK):
        res = nets.forward(pts[start:start + _CHUNK])
        for f in VARIABLES:
            out[f][start:start + _CHUNK] = res[f]
    return out


def _speed(d):
    return np.hypot(d["u"], d["v"])


def validation_errors(nets, samples, re=None, variables=VARIABLES) -> ValidationMetrics:
    """``||pred - true||_2 / ||true||_2`` for each variable over ``samples``."""
    if len(samples) == 0:
        raise ValueError("validation set is empty")
    if re is None:
        re = samples.re
    pred = predict(nets, samples.x, samples.y, re)
    errs, absolute = {}, []
    for f in variables:
        val, is_abs = relative_l2(pred[f], getattr(samples, f))
        errs[f"rel_err_{f}"] = val
        if is_abs:
            absolute.append(f)
    return ValidationMetrics(**errs, n_points=len(samples), absolute=absolute)


# -- grids -------------------------------------------------------------------

@dataclass
class FieldGrid:
    nx: int
    ny: int
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    variable: str
    values: np.ndarray

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs nx, ny >= 2")
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.ny, self.nx)

    @property
    def mask(self) -> np.ndarray:
        """True where a cell is masked (carries the NaN sentinel)."""
        return np.isnan(self.values)

    def centers(self):
        dx = (self.xmax - self.xmin) / self.nx
        dy = (self.ymax - self.ymin) / self.ny
        xc = self.xmin + dx * (np.arange(self.nx) + 0.5)
        yc = self.ymin + dy * (np.arange(self.ny) + 0.5)
        return np.meshgrid(xc, yc)


def field_grid(nets, variable: str, bounds, nx: int = GRID_DEFAULT[0], ny: int = GRID_DEFAULT[1],
               re=None, geometry=None) -> FieldGrid:
    """Evaluate the networks at cell centres; ``variable='speed'`` gives |(u, v)|."""
    (x0, x1), (y0, y1) = bounds
    grid = FieldGrid(nx, ny, x0, x1, y0, y1, variable, np.zeros((ny, nx)))
    X, Y = grid.centers()
    pred = predict(nets, X.ravel(), Y.ravel(), re)
    vals = _speed(pred) if variable == "speed" else pred[variable]
    vals = vals.reshape(ny, nx)
    if geometry is not None:
        fluid = geometry.contains(np.column_stack([X.ravel(), Y.ravel()])).reshape(ny, nx)
        vals = np.where(fluid, vals, np.nan)
    grid.values = vals
    return grid


def _cell_index(x, y, grid: FieldGrid):
    ix = np.floor((x - grid.xmin) / (grid.xmax - grid.xmin) * grid.nx).astype(int)
    iy = np.floor((y - grid.ymin) / (grid.ymax - grid.ymin) * grid.ny).astype(int)
    return np.clip(ix, 0, grid.nx - 1), np.clip(iy, 0, grid.ny - 1)


def log_error_grid(x, y, err, bounds, nx, ny, variable, geometry=None) -> FieldGrid:
    """Bin absolute errors into cells (max per cell), take log, min-max scale to [0, 1].

    Cells without any point, or inside the obstacle, are masked.
    """
    (x0, x1), (y0, y1) = bounds
    grid = FieldGrid(nx, ny, x0, x1, y0, y1, variable, np.full((ny, nx), np.nan))
    ix, iy = _cell_index(np.asarray(x), np.asarray(y), grid)
    cell_err = np.full(nx * ny, -np.inf)
    np.maximum.at(cell_err, iy * nx + ix, np.abs(np.asarray(err, dtype=np.float64)))
    cell_err = cell_err.reshape(ny, nx)
    vals = np.where(np.isfinite(cell_err), np.log(np.maximum(cell_err, 0.0) + ERROR_MAP_DELTA), np.nan)
    if geometry is not None:
        X, Y = grid.centers()
        fluid = geometry.contains(np.column_stack([X.ravel(), Y.ravel()])).reshape(ny, nx)
        vals = np.where(fluid, vals, np.nan)
    live = ~np.isnan(vals)
    if not live.any():
        raise ValueError("error map has no unmasked cells")
    lo, hi = vals[live].min(), vals[live].max()
    grid.values = np.where(live, (vals - lo) / (hi - lo) if hi > lo else 0.0, np.nan)
    return grid


def error_map(nets, cloud, variable: str, bounds=None, nx: int = GRID_DEFAULT[0], ny: int = GRID_DEFAULT[1],
              re=None, geometry=None) -> FieldGrid:
    """Normalized log of |pred - true| over a cloud with known values."""
    if bounds is None:
        bounds = [[float(cloud.x.min()), float(cloud.x.max())], [float(cloud.y.min()), float(cloud.y.max())]]
    if re is None:
        re = cloud.re
    pred = predict(nets, cloud.x, cloud.y, re)
    if variable == "speed":
        err = _speed(pred) - np.hypot(cloud.u, cloud.v)
    else:
        err = pred[variable] - getattr(cloud, variable)
    return log_error_grid(cloud.x, cloud.y, err, bounds, nx, ny, variable, geometry)


# -- files ---------------------------------------------------------------------

_PLOT_SCRIPT = '''"""Render {csv} (written by ranspinn)."""
import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    spec = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
vals = np.genfromtxt(path, delimiter=",", skip_header=1)
ext = [float(spec[k]) for k in ("xmin", "xmax", "ymin", "ymax")]
plt.imshow(np.ma.masked_invalid(vals), origin="lower", extent=ext, aspect="equal", cmap="viridis")
plt.colorbar(label=spec["variable"])
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def export_grid(grid: FieldGrid, path, plot_script: bool = False) -> Path:
    """CSV matrix (row 0 = lowest y) under a one-line ``# key=value`` header."""
    path = Path(path)
    header = (f"# nx={grid.nx} ny={grid.ny} xmin={grid.xmin!r} xmax={grid.xmax!r} "
              f"ymin={grid.ymin!r} ymax={grid.ymax!r} variable={grid.variable}")
    lines = [header]
    for row in grid.values:
        lines.append(",".join("nan" if np.isnan(v) else repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if plot_script:
        path.with_suffix(".plot.py").write_text(_PLOT_SCRIPT.format(csv=path.name), encoding="utf-8")
    return path


def read_grid(path) -> FieldGrid:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        spec = dict(kv.split("=", 1) for kv in fh.readline().lstrip("# ").split())
        rows = [[float(t) for t in line.strip().split(",")] for line in fh if line.strip()]
    return FieldGrid(int(spec["nx"]), int(spec["ny"]), float(spec["xmin"]), float(spec["xmax"]),
                     float(spec["ymin"]), float(spec["ymax"]), spec["variable"], np.array(rows))


def write_metrics(path, metrics) -> Path:
    """Stable JSON (sorted keys, fixed float formatting)."""
    path = Path(path)
    if hasattr(metrics, "to_dict"):
        metrics = metrics.to_dict()
    path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
