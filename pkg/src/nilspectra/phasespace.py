"""Phase-space volumes ``N0(lam) = |{(x, xi) : w(x, xi)^2 <= lam}|`` and ``Z0(t)``.

Monte Carlo runs in fixed-size chunks; chunk ``c`` draws from its own stream
``SeedSequence(seed, spawn_key=(*stream, c))`` so results do not depend on the
number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import UnboundedSublevelError
from .nilpotent import Representation
from .schrodinger import SchrodingerModel, m_symbol

CHUNK = 1 << 16
BOX_CAP = 2.0**20
FACE_SAMPLES = 100


@dataclass(frozen=True)
class WeightEvaluator:
    """Vectorized ``w(x, xi)`` on ``R^{2n}``, with ``w >= |xi|``."""

    fn: Callable
    n: int
    tag: str

    def __call__(self, x, xi):
        return self.fn(x, xi)

    @classmethod
    def from_schrodinger(cls, model: SchrodingerModel) -> WeightEvaluator:
        return cls(lambda x, xi: m_symbol(model, x, xi), model.n, "schrodinger-M")

    @classmethod
    def from_representation(cls, rep: Representation) -> WeightEvaluator:
        return cls(rep.m_pi, rep.n, f"representation-M_pi:{rep.name}")


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def x_half_width(self) -> float:
        return float(self.hi[0])


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float
    samples: int
    box: Box
    hits: int = 0

    def as_row(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, "box_volume": self.box.volume}


def _face_points(n: int, L: float) -> np.ndarray:
    rng = np.random.default_rng(0)
    faces = []
    for k in range(n):
        for sign in (-1.0, 1.0):
            pts = rng.uniform(-L, L, size=(FACE_SAMPLES, n))
            pts[:, k] = sign * L
            faces.append(pts)
    return np.concatenate(faces)


def bounding_box(w: WeightEvaluator, lam: float) -> Box:
    """Box containing the sublevel set ``w^2 <= lam`` (heuristic in x, exact in xi)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    root = math.sqrt(lam)
    L = 1.0
    zero = np.zeros(w.n)
    while True:
        pts = _face_points(w.n, L)
        if np.min(w(pts, zero)) > root:
            break
        L *= 2.0
        if L > BOX_CAP:
            raise UnboundedSublevelError(f"sublevel set of {w.tag} at lambda={lam:g} does not fit in [-2^20, 2^20]^n")
    lo = np.concatenate([np.full(w.n, -L), np.full(w.n, -root)])
    return Box(lo, -lo)


def _count_chunk(w: WeightEvaluator, lam: float, box: Box, size: int, key: tuple) -> int:
    rng = np.random.default_rng(np.random.SeedSequence(key[0], spawn_key=key[1:]))
    z = rng.uniform(box.lo, box.hi, size=(size, len(box.lo)))
    vals = w(z[:, : w.n], z[:, w.n :])
    return int(np.count_nonzero(vals * vals <= lam))


def n0_estimate(w: WeightEvaluator, lam: float, n_samples: int = 1_000_000, seed: int = 0,
                stream: Sequence[int] = (), workers: int = 1) -> VolumeEstimate:
    """Uniform Monte Carlo over :func:`bounding_box`; deterministic given ``(seed, stream)``."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    box = bounding_box(w, lam)
    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    keys = [(int(seed), *map(int, stream), c) for c in range(len(sizes))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(lambda a: _count_chunk(w, lam, box, *a), zip(sizes, keys)))
    else:
        hits = sum(_count_chunk(w, lam, box, s, k) for s, k in zip(sizes, keys))
    p = hits / n_samples
    vol = box.volume
    return VolumeEstimate(vol * p, vol * math.sqrt(p * (1 - p) / n_samples), n_samples, box, hits)


def n0_grid_oracle(w: WeightEvaluator, lam: float, pts_per_dim: int = 512, batch: int = 1 << 20) -> float:
    """Midpoint-rule indicator quadrature over the bounding box (``2n <= 4``)."""
    if 2 * w.n > 4:
        raise ValueError("grid oracle is limited to phase spaces of dimension 4")
    if pts_per_dim < 64:
        raise ValueError("need at least 64 points per dimension")
    box = bounding_box(w, lam)
    d = 2 * w.n
    axes = [box.lo[k] + (np.arange(pts_per_dim) + 0.5) * (box.hi[k] - box.lo[k]) / pts_per_dim for k in range(d)]
    cell = box.volume / pts_per_dim**d
    total = pts_per_dim**d
    hits = 0
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total))
        z = np.stack([axes[k][(idx // pts_per_dim ** (d - 1 - k)) % pts_per_dim] for k in range(d)], axis=-1)
        vals = w(z[:, : w.n], z[:, w.n :])
        hits += int(np.count_nonzero(vals * vals <= lam))
    return hits * cell


def minimum_weight(w: WeightEvaluator, L: float, samples: int = 4096) -> float:
    """Sampled estimate of ``min_x w(x, 0)`` on ``[-L, L]^n`` (origin included)."""
    rng = np.random.default_rng(1)
    pts = np.vstack([np.zeros((1, w.n)), rng.uniform(-L, L, size=(samples, w.n))])
    return float(np.min(w(pts, np.zeros(w.n))))


class N0Curve:
    """``N0`` tabulated on increasing nodes; piecewise-linear between them."""

    def __init__(self, s: np.ndarray, values: np.ndarray, stderr: np.ndarray | None = None):
        order = np.argsort(s)
        self.s = np.asarray(s, dtype=float)[order]
        self.values = np.asarray(values, dtype=float)[order]
        self.stderr = None if stderr is None else np.asarray(stderr, dtype=float)[order]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return log_interp(s, self.s, self.values)

    def z0(self, t, refine: int = 16):
        """``int_0^inf t e^{-ts} N0(s) ds``.

        ``N0`` is taken as the monotone cubic interpolant of the nodes (zero at
        ``s = 0``), sampled ``refine`` times per interval and integrated exactly
        against the exponential as a piecewise-linear function.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0):
            raise ValueError("t must be positive")
        s, v = self._refined(refine)
        out = np.zeros_like(t)
        for i, ti in enumerate(t):
            out[i] = _product_trapezoid(s, v, ti) + math.exp(-ti * s[-1]) * v[-1]
        return out


    def _refined(self, refine: int):
        knots = np.concatenate([[0.0], self.s])
        vals = np.concatenate([[0.0], self.values])
        frac = np.linspace(0.0, 1.0, refine + 1)[:-1]
        s = np.concatenate([(knots[:-1, None] + frac[None, :] * np.diff(knots)[:, None]).ravel(), knots[-1:]])
        v = np.maximum(PchipInterpolator(knots, vals)(s), 0.0)
        return s, v


def _product_trapezoid(s: np.ndarray, v: np.ndarray, t: float) -> float:
    # exact integral of t e^{-ts} times the piecewise-linear interpolant of v
    ds = np.diff(s)
    x = t * ds
    Ei = np.exp(-t * s[:-1])
    one_minus = -np.expm1(-x)
    slope_part = np.where(x > 1e-8, one_minus / t - np.exp(-x) * ds, t * ds * ds / 2)
    slope = np.diff(v) / ds
    return float(np.sum(Ei * (v[:-1] * one_minus + slope * slope_part)))


def log_interp(x, xp: np.ndarray, fp: np.ndarray):
    """Interpolate linearly in ``(log x, log f)``; linear in ``f`` across zero values.

    Extrapolates as a power law from the two end nodes; below the first node a
    zero value stays zero.
    """
    x = np.asarray(x, dtype=float)
    lx = np.log(np.maximum(x, 1e-300))
    lxp = np.log(xp)
    pos = fp > 0
    out = np.empty_like(lx)
    idx = np.clip(np.searchsorted(lxp, lx) - 1, 0, len(xp) - 2)
    x0, x1 = lxp[idx], lxp[idx + 1]
    f0, f1 = fp[idx], fp[idx + 1]
    frac = (lx - x0) / (x1 - x0)
    both = pos[idx] & pos[idx + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = np.log(np.where(both, f0, 1.0)) + frac * (np.log(np.where(both, f1, 1.0)) - np.log(np.where(both, f0, 1.0)))
    out = np.where(both, np.exp(logv), f0 + frac * (f1 - f0))
    below = lx < lxp[0]
    if np.any(below):
        out = np.where(below & (fp[0] <= 0), 0.0, out)
    out = np.maximum(out, 0.0)
    return out[()] if out.ndim == 0 else out


def n0_curve(w: WeightEvaluator, s_nodes, n_samples: int = 200_000, seed: int = 0,
             stream: Sequence[int] = (), workers: int = 1) -> N0Curve:
    """One independent :func:`n0_estimate` per node (own box, own stream)."""
    ests = [n0_estimate(w, s, n_samples, seed, (*stream, i), workers) for i, s in enumerate(s_nodes)]
    return N0Curve(np.asarray(s_nodes, dtype=float), np.array([e.value for e in ests]), np.array([e.stderr for e in ests]))


def default_s_nodes(w: WeightEvaluator, t_min: float, nodes: int = 64) -> np.ndarray:
    """Geometric nodes from a tenth of ``min w^2`` up to where ``e^{-ts}`` is negligible."""
    w0 = float(w(np.zeros(w.n), np.zeros(w.n)))
    box = bounding_box(w, max(4 * w0 * w0, 1.0))
    m0 = minimum_weight(w, box.x_half_width)
    s_low = max(m0 * m0, 1e-6) / 10
    s_max = max(10 * m0 * m0, 80.0 / t_min)
    return np.geomspace(s_low, s_max, nodes)


def z0_estimate(w: WeightEvaluator, t, curve: N0Curve | None = None, nodes: int = 64,
                n_samples: int = 200_000, seed: int = 0, stream: Sequence[int] = (), workers: int = 1):
    """``Z0(t) = int t e^{-ts} N0(s) ds`` from a shared ``N0`` curve."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    if curve is None:
        curve = n0_curve(w, default_s_nodes(w, float(t_arr.min()), nodes), n_samples, seed, stream, workers)
    out = curve.z0(t_arr)
    return float(out[0]) if np.ndim(t) == 0 else out


def z0_direct(w: WeightEvaluator, t: float, n_samples: int = 1_000_000, seed: int = 0) -> tuple[float, float]:
    """Independent estimator: MC mean of ``exp(-t w^2)`` over the box of ``w^2 <= 60/t``."""
    w0 = float(w(np.zeros(w.n), np.zeros(w.n)))
    box = bounding_box(w, 60.0 / t + w0 * w0)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    total = 0.0
    sq = 0.0
    done = 0
    while done < n_samples:
        size = min(CHUNK, n_samples - done)
        z = rng.uniform(box.lo, box.hi, size=(size, len(box.lo)))
        vals = w(z[:, : w.n], z[:, w.n :])
        f = np.exp(-t * vals * vals)
        total += f.sum()
        sq += (f * f).sum()
        done += size
    mean = total / n_samples
    var = sq / n_samples - mean * mean
    return box.volume * mean, box.volume * math.sqrt(max(var, 0.0) / n_samples)
