"""Per-variable coordinate networks with a shared Fourier feature encoding.

Five independent MLPs (u, v, p, k, eps) read the same embedded input. The
k head ends in softplus and the eps head predicts log eps, so both exposed
fields are strictly positive for any parameters.
"""
from __future__ import annotations

import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import jet as J
from .autodiff import tape as ad

FIELDS = ("u", "v", "p", "k", "eps")
OUTPUT_TRANSFORMS = {"u": "identity", "v": "identity", "p": "identity", "k": "softplus", "eps": "exp"}
MODES = ("fixed-Re", "parametric-Re")
CHECKPOINT_FORMAT = "ranspinn-checkpoint"
CHECKPOINT_VERSION = 1

# Inputs are mapped affinely onto [0, HALF_PERIOD] before embedding, so the
# lowest integer frequency never wraps around inside the training box.
# Re is squeezed further, onto [0, HALF_PERIOD / n_freq]: it is sampled at
# only a few values, so even its highest frequency must stay below half a
# period across the training range or the fit oscillates between cases.
HALF_PERIOD = 0.5


class CheckpointError(ValueError):
    pass


@dataclass
class NetworkConfig:
    widths: list = field(default_factory=lambda: [64, 64, 64, 64])
    n_freq: int = 10
    seed: int = 0
    mode: str = "fixed-Re"
    activation: str = "tanh"
    bounds: list = field(default_factory=lambda: [[0.0, 1.0], [0.0, 1.0]])
    re_range: list | None = None

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        if not self.widths:
            raise ValueError("need at least one hidden layer")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"zero-width layer in {self.widths}")
        if self.n_freq < 1:
            raise ValueError("n_freq must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.bounds = [[float(lo), float(hi)] for lo, hi in self.bounds]
        if len(self.bounds) != 2 or any(hi <= lo for lo, hi in self.bounds):
            raise ValueError(f"bad spatial bounds {self.bounds}")
        if self.mode == "parametric-Re":
            if self.re_range is None:
                raise ValueError("parametric-Re mode needs re_range")
            lo, hi = map(float, self.re_range)
            if hi <= lo:
                raise ValueError(f"bad re_range {self.re_range}")
            self.re_range = [lo, hi]

    @property
    def n_inputs(self) -> int:
        return 3 if self.mode == "parametric-Re" else 2

    def to_dict(self) -> dict:
        return asdict(self)


class FourierEmbedding:
    """Fixed sin/cos features over an integer frequency ladder per input axis."""

    def __init__(self, n_freq: int, n_inputs: int, offset, scale):
        ladder = np.arange(1, n_freq + 1, dtype=np.float64)
        self.frequencies = np.zeros((n_freq * n_inputs, n_inputs))
        for d in range(n_inputs):
            self.frequencies[d * n_freq:(d + 1) * n_freq, d] = ladder
        self.offset = np.asarray(offset, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @property
    def dim(self) -> int:
        return 2 * self.frequencies.shape[0]

    def __call__(self, points: np.ndarray, n_active: int = 0) -> np.ndarray:
        """Stacked jet of the features, shape ``(channels(n_active), B, dim)``.

        Derivatives are taken with respect to the first ``n_active`` input
        columns (the spatial coordinates).
        """
        xi = (points - self.offset) * self.scale
        theta = 2.0 * np.pi * (xi @ self.frequencies.T)
        s, c = np.sin(theta), np.cos(theta)
        if n_active == 0:
            return np.concatenate([s, c], axis=-1)[None]
        dtheta = 2.0 * np.pi * self.frequencies[:, :n_active].T * self.scale[:n_active, None]
        rows, cols = J.tri_pairs(n_active)
        out = np.empty((J.channels(n_active),) + s.shape[:-1] + (self.dim,))
        out[0] = np.concatenate([s, c], axis=-1)
        for i in range(n_active):
            out[1 + i] = np.concatenate([c * dtheta[i], -s * dtheta[i]], axis=-1)
        for p, (i, j) in enumerate(zip(rows, cols)):
            dd = dtheta[i] * dtheta[j]
            out[1 + n_active + p] = np.concatenate([-s * dd, -c * dd], axis=-1)
        return out


class Mlp:
    """Dense tanh network with a scalar output head."""

    def __init__(self, sizes, transform: str = "identity", activation: str = "tanh"):
        self.sizes = [int(s) for s in sizes]
        self.transform = transform
        self.activation = activation
        self.weights = [np.zeros((a, b)) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.biases = [np.zeros(b) for b in self.sizes[1:]]

    def glorot_(self, rng: np.random.Generator) -> "Mlp":
        for w in self.weights:
            limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        for b in self.biases:
            b[...] = 0.0
        return self

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def raw(self, stack, n: int, params=None):
        """Untransformed head output as a stacked jet of shape (C, B)."""
        params = self.params() if params is None else params
        z = stack
        last = len(self.weights) - 1
        for layer in range(len(self.weights)):
            z = J.stacked_affine(z, params[2 * layer], params[2 * layer + 1])
            if layer < last:
                z = J.stacked_activation(z, n, self.activation)
        return ad.getitem(z, (slice(None), slice(None), 0))


class FieldNetworkSet:
    """The five field networks plus their shared embedding."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        offset = [lo for lo, _ in config.bounds]
        scale = [HALF_PERIOD / (hi - lo) for lo, hi in config.bounds]
        if config.mode == "parametric-Re":
            lo, hi = config.re_range
            offset.append(lo)
            scale.append(HALF_PERIOD / (config.n_freq * (hi - lo)))
        self.embedding = FourierEmbedding(config.n_freq, config.n_inputs, offset, scale)
        sizes = [self.embedding.dim] + config.widths + [1]
        self.nets = {f: Mlp(sizes, OUTPUT_TRANSFORMS[f], config.activation) for f in FIELDS}

    @classmethod
    def init(cls, config: NetworkConfig) -> "FieldNetworkSet":
        """Glorot-uniform weights, zero biases, all drawn from ``config.seed``."""
        nets = cls(config)
        rng = np.random.default_rng(config.seed)
        for f in FIELDS:
            nets.nets[f].glorot_(rng)
        return nets

    # -- parameter layout ------------------------------------------------
    def params(self) -> list[np.ndarray]:
        """Parameter arrays in flat-vector order: net by net, W then b per layer."""
        out = []
        for f in FIELDS:
            out += self.nets[f].params()
        return out

    def param_slices(self) -> dict:
        """Index ranges of each network inside the flat parameter vector."""
        out, start = {}, 0
        for f in FIELDS:
            n = self.nets[f].n_params
            out[f] = slice(start, start + n)
            start += n
        return out

    @property
    def n_params(self) -> int:
        return sum(self.nets[f].n_params for f in FIELDS)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def unflatten(self, flat) -> list[np.ndarray]:
        """Flat vector -> list of arrays shaped like :meth:`params` (copies)."""
        flat = np.asarray(flat, dtype=np.float64)
        out, i = [], 0
        for p in self.params():
            out.append(flat[i:i + p.size].reshape(p.shape).copy())
            i += p.size
        return out

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        i = 0
        for p in self.params():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "FieldNetworkSet":
        other = FieldNetworkSet(self.config)
        other.set_flat(self.get_flat())
        return other

    # -- evaluation ------------------------------------------------------
    def _points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        d = pts.shape[1]
        if self.config.mode == "parametric-Re":
            if d != 3:
                raise ValueError(f"parametric-Re networks take (x, y, Re), got {d} inputs")
        else:
            if d not in (2, 3):
                raise ValueError(f"fixed-Re networks take (x, y[, Re]), got {d} inputs")
            pts = pts[:, :2]
        return pts, single

    def _split_params(self, params):
        if params is None:
            return {f: None for f in FIELDS}
        out, i = {}, 0
        for f in FIELDS:
            k = len(self.nets[f].params())
            out[f] = params[i:i + k]
            i += k
        return out

    def raw_stacks(self, points, n: int, params=None, fields=FIELDS) -> dict:
        """Untransformed outputs of each network as stacked jets (C, B)."""
        pts, _ = self._points(points)
        emb = self.embedding(pts, n)
        per = self._split_params(params)
        return {f: self.nets[f].raw(emb, n, per[f]) for f in fields}

    def forward(self, points, params=None) -> dict:
        """Field values ``{u, v, p, k, eps}`` (plus ``log_eps``) at the points."""
        pts, single = self._points(points)
        raw = self.raw_stacks(pts, 0, params)
        out = {}
        for f in FIELDS:
            r = ad.getitem(raw[f], 0)
            if f == "k":
                r = ad.softplus(r)
            elif f == "eps":
                out["log_eps"] = r
                r = ad.exp(r)
            out[f] = r
        if single:
            out = {f: ad.getitem(v, 0) if isinstance(v, ad.Var) else v[0] for f, v in out.items()}
        return out

    def forward_jets(self, points, params=None) -> dict:
        """:class:`Jet2` per field with derivatives over (x, y) only."""
        pts, _ = self._points(points)
        raw = self.raw_stacks(pts, 2, params)
        out = {}
        for f in FIELDS:
            jet = J.unstack(raw[f], 2)
            if f == "k":
                jet = J.softplus(jet)
            elif f == "eps":
                out["log_eps"] = jet
                jet = J.exp(jet)
            out[f] = jet
        return out


def save_checkpoint(path, nets: FieldNetworkSet, extra: dict | None = None) -> Path:
    """Write config + flat parameters (+ optional named arrays) to ``.npz``."""
    path = Path(path)
    arrays = {
        "format": np.array(CHECKPOINT_FORMAT),
        "version": np.array(CHECKPOINT_VERSION),
        "config": np.array(json.dumps(nets.config.to_dict(), sort_keys=True)),
        "params": nets.get_flat(),
    }
    for key, val in (extra or {}).items():
        arrays[f"extra/{key}"] = np.asarray(val)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> tuple[FieldNetworkSet, dict]:
    try:
        return _load_checkpoint(path)
    except (ValueError, KeyError, zipfile.BadZipFile) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None


def _load_checkpoint(path):
    with np.load(Path(path), allow_pickle=False) as data:
        if "format" not in data or str(data["format"]) != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        config = NetworkConfig(**json.loads(str(data["config"])))
        nets = FieldNetworkSet(config)
        nets.set_flat(data["params"])
        extra = {k[len("extra/"):]: data[k].copy() for k in data.files if k.startswith("extra/")}
    return nets, extra
