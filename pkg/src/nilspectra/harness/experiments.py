"""Experiments pairing discrete spectra with their phase-space proxies."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..errors import ValidityError
from ..nilpotent import Representation, m_pi_inf
from ..phasespace import N0Curve, WeightEvaluator, default_s_nodes, n0_curve, n0_estimate
from ..schrodinger import SchrodingerModel, m_weight, require_nondegenerate
from ..spectral.grid import GridSpec, HermitianOperatorGrid, assemble
from ..spectral.heat import heat_trace
from ..spectral.inertia import gershgorin_bounds, inertia_count, inertia_counts
from ..spectral.lanczos import lowest_eigs
from ..spectral.sobolev import SobolevOperators, random_band_limited
from .config import ExperimentConfig, build_model
from .fitting import fit_constant

log = logging.getLogger(__name__)

MAX_COUNT_FRACTION = 0.2
MAX_RICHARDSON_ERROR = 0.02
H_SCALE = 0.4
EXTENSION_NODES = 48


@dataclass
class EquivalenceReport:
    kind: str
    columns: tuple[str, ...]
    rows: list[dict]
    fitted_C: float | None
    ceiling: float
    passed: bool
    provenance: dict
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "fitted_C": self.fitted_C,
            "pass": self.passed,
            "rows": [{k: _json_value(r[k]) for k in self.columns} for r in self.rows],
            "provenance": self.provenance,
            **({"extra": self.extra} if self.extra else {}),
        }


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _csv_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(report: EquivalenceReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_csv_value(row[c]) for c in report.columns])
    return path


def write_report(report: EquivalenceReport, out_dir, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    csv_path = write_csv(report, out / f"{stem}.csv")
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


# -- models -----------------------------------------------------------------


def weight_evaluator(model) -> WeightEvaluator:
    if isinstance(model, SchrodingerModel):
        return WeightEvaluator.from_schrodinger(model)
    return WeightEvaluator.from_representation(model)


def position_weight(model, x) -> np.ndarray:
    """``M(x)`` for a Schrodinger model, ``inf_xi M_pi(x, xi)`` for a representation."""
    if isinstance(model, SchrodingerModel):
        return np.asarray(m_weight(model, x), dtype=float)
    return np.asarray(m_pi_inf(model, x), dtype=float)


def check_model(model) -> None:
    """Reject degenerate Schrodinger models and non-homomorphic representations."""
    if isinstance(model, SchrodingerModel):
        require_nondegenerate(model)
    elif isinstance(model, Representation):
        model.check_homomorphism().raise_if_failed()
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")


def _boundary_points(n: int, L: float, per_axis: int = 17) -> np.ndarray:
    if n == 1:
        return np.array([[-L], [L]])
    ticks = np.linspace(-L, L, per_axis)
    faces = []
    for k in range(n):
        rest = np.array(list(product(ticks, repeat=n - 1)))
        for sign in (-1.0, 1.0):
            faces.append(np.insert(rest, k, sign * L, axis=1))
    return np.concatenate(faces)


def truncation_half_width(model, lam_max: float, factor: float = 2.0, cap: float = 2.0**20) -> float:
    """Smallest half-width (to 2%) whose boundary has weight at least ``factor * sqrt(lam_max)``."""
    target = factor * math.sqrt(lam_max)
    n = model.n

    def ok(L):
        return float(np.min(position_weight(model, _boundary_points(n, L)))) >= target

    hi = 0.5
    while not ok(hi):
        hi *= 2.0
        if hi > cap:
            raise ValidityError(f"weight never reaches {target:g} on boxes up to half-width {cap:g}")
    lo = hi / 2.0
    while hi / lo > 1.02:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _kth_eigenvalue(H: HermitianOperatorGrid, k: int, upper: float, rtol: float = 1e-7) -> float:
    lo, top = gershgorin_bounds(H)
    hi = upper
    while inertia_count(H, hi) <= k:
        if hi >= top:
            return top
        hi = min(2.0 * hi if hi > 0 else 1.0, top * (1 + 1e-12))
    while hi - lo > rtol * max(abs(hi), 1.0):
        mid = 0.5 * (lo + hi)
        if inertia_count(H, mid) > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Validity:
    count: int
    size: int
    richardson_error: float

    @property
    def fraction(self) -> float:
        return self.count / self.size

    @property
    def ok(self) -> bool:
        return self.fraction < MAX_COUNT_FRACTION and self.richardson_error < MAX_RICHARDSON_ERROR

    def as_dict(self) -> dict:
        return {"count_at_lambda_max": self.count, "count_fraction": self.fraction,
                "richardson_error": self.richardson_error}


def check_validity(ops, H: HermitianOperatorGrid, lam_max: float) -> Validity:
    """Count fraction at ``lam_max`` and the two-grid estimate of the relative
    error of the highest eigenvalue below it (second-order extrapolation)."""
    grid = H.grid
    count = inertia_count(H, lam_max)
    if count == 0:
        return Validity(0, H.N, 0.0)
    coarse_m = (grid.m - 1) // 2
    if coarse_m < 8:
        return Validity(count, H.N, math.inf)
    coarse = GridSpec(grid.n, grid.L, coarse_m, grid.cap)
    Hc = assemble(ops, coarse)
    if count > Hc.N:
        return Validity(count, H.N, math.inf)
    fine_val = _kth_eigenvalue(H, count - 1, lam_max)
    coarse_val = _kth_eigenvalue(Hc, count - 1, lam_max)
    ratio = coarse.h / grid.h
    err = abs(coarse_val - fine_val) / (ratio * ratio - 1.0) / abs(fine_val)
    return Validity(count, H.N, float(err))


def resolve_grid(cfg: ExperimentConfig, model, lam_max: float) -> tuple[HermitianOperatorGrid, Validity]:
    """Assemble on the configured grid, or pick one automatically, and certify ``lam_max``.

    Automatic grids take the box from :func:`truncation_half_width` and a
    spacing of ``0.4 / sqrt(lam_max)``, then double the resolution until the
    validity conditions hold or the grid cap is hit.
    """
    if not cfg.grid.auto:
        grid = GridSpec(model.n, cfg.grid.L, cfg.grid.m, cfg.grid.cap)
        H = assemble(model, grid)
        val = check_validity(model, H, lam_max)
        if not val.ok:
            raise ValidityError(
                f"lambda_max={lam_max:g} is beyond the validity bound of L={grid.L:g}, m={grid.m}: "
                f"count fraction {val.fraction:.3f}, estimated eigenvalue error {val.richardson_error:.3g}"
            )
        return H, val
    L = truncation_half_width(model, lam_max)
    m = int(math.ceil(2 * L * math.sqrt(lam_max) / H_SCALE))
    m = max(m | 1, 33)
    while True:
        grid = GridSpec(model.n, L, m, cfg.grid.cap)
        H = assemble(model, grid)
        val = check_validity(model, H, lam_max)
        log.info("grid L=%.4g m=%d: %s", L, m, val.as_dict())
        if val.ok:
            return H, val
        m = 2 * m + 1


def _provenance(cfg: ExperimentConfig, model, H: HermitianOperatorGrid | None = None, **extra) -> dict:
    prov = {
        "model": getattr(model, "name", None) or f"schrodinger(n={model.n})",
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": cfg.sampling.seed,
        "samples": cfg.sampling.samples,
        "config_digest": cfg.digest(),
        "spec_version": cfg.spec_version,
    }
    if H is not None:
        prov["grid"] = {"n": H.grid.n, "L": H.grid.L, "m": H.grid.m, "h": H.grid.h, "N": H.N}
    prov.update(extra)
    return prov


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


# -- experiments ----------------------------------------------------------------


def run_volume(cfg: ExperimentConfig, model=None) -> EquivalenceReport:
    """``N0`` on the lambda grid, no spectrum."""
    model = build_model(cfg.model) if model is None else model
    check_model(model)
    lams = cfg.lambda_grid.points(cfg.parameter)
    if len(lams) == 0:
        raise ValueError("lambda_grid is empty")
    w = weight_evaluator(model)
    s = cfg.sampling
    rows = []
    for i, lam in enumerate(lams):
        est = n0_estimate(w, float(lam), s.samples, s.seed, (0, i), s.workers)
        rows.append({"lambda": float(lam), "N0": est.value, "N0_stderr": est.stderr,
                     "samples": est.samples, "box_volume": est.box.volume})
    cols = ("lambda", "N0", "N0_stderr", "samples", "box_volume")
    return EquivalenceReport("volume", cols, rows, None, cfg.ceiling_c, True, _provenance(cfg, model))


def count_proxy(w: WeightEvaluator, cfg: ExperimentConfig, lams: np.ndarray, row_values: np.ndarray):
    """Row estimates plus independent nodes spanning ``ceiling`` beyond the grid both ways."""
    s = cfg.sampling
    ext = np.geomspace(lams.min() / cfg.ceiling_c, lams.max() * cfg.ceiling_c, EXTENSION_NODES)
    ext = ext[~np.isin(ext, lams)]
    curve = n0_curve(w, ext, max(s.samples // 4, 1000), s.seed, (1,), s.workers)
    nodes = np.concatenate([lams, ext])
    vals = np.concatenate([row_values, curve.values])
    order = np.argsort(nodes)
    nodes, vals = nodes[order], np.maximum.accumulate(vals[order])
    return nodes, vals


def run_count_experiment(cfg: ExperimentConfig, model=None, dump_matrix=None) -> EquivalenceReport:
    """``N(lam)`` by inertia against ``N0(lam)`` by Monte Carlo, with the fitted constant."""
    model = build_model(cfg.model) if model is None else model
    check_model(model)
    lams = cfg.lambda_grid.points(cfg.parameter)
    if len(lams) == 0:
        raise ValueError("lambda_grid is empty")
    H, validity = resolve_grid(cfg, model, float(lams.max()))
    if dump_matrix is not None:
        H.dump(dump_matrix)
    s = cfg.sampling
    counts = inertia_counts(H, lams, workers=s.workers)
    w = weight_evaluator(model)
    ests = [n0_estimate(w, float(lam), s.samples, s.seed, (0, i), s.workers) for i, lam in enumerate(lams)]
    n0 = np.array([e.value for e in ests])
    proxy = count_proxy(w, cfg, lams, n0)
    C = fit_constant(np.column_stack([lams, counts]), "count", proxy)
    rows = []
    for lam, N, e in zip(lams, counts, ests):
        ratio = N / e.value if e.value > 0 else (math.nan if N == 0 else math.inf)
        rows.append({"lambda": float(lam), "N": int(N), "N0": e.value, "N0_stderr": e.stderr, "ratio": ratio})
    cols = ("lambda", "N", "N0", "N0_stderr", "ratio")
    extra = {"slope_N": _slope(lams, counts), "slope_N0": _slope(lams, n0)}
    prov = _provenance(cfg, model, H, validity=validity.as_dict())
    return EquivalenceReport("count", cols, rows, C, cfg.ceiling_c, C <= cfg.ceiling_c, prov, extra)


def heat_curve(w: WeightEvaluator, cfg: ExperimentConfig, ts: np.ndarray) -> N0Curve:
    s = cfg.sampling
    nodes = default_s_nodes(w, float(ts.min()) / cfg.ceiling_c)
    return n0_curve(w, nodes, max(s.samples // 4, 1000), s.seed, (2,), s.workers)


def run_heat_experiment(cfg: ExperimentConfig, model=None) -> EquivalenceReport:
    """``Z(t)`` from the certified spectrum below the cutoff against ``Z0(t)``."""
    model = build_model(cfg.model) if model is None else model
    check_model(model)
    ts = cfg.t_grid.points()
    if len(ts) == 0:
        raise ValueError("t_grid is empty")
    cutoff = cfg.heat.cutoff * (cfg.parameter if cfg.lambda_grid.scale_with_parameter else 1.0)
    H, validity = resolve_grid(cfg, model, cutoff)
    K = inertia_count(H, cutoff)
    eigs = lowest_eigs(H, K, seed=cfg.sampling.seed) if K else np.array([])
    w = weight_evaluator(model)
    curve = heat_curve(w, cfg, ts)
    slack = cfg.heat.slack
    if slack is None:
        # the tail only needs over-counting beyond the cutoff: fit on its top quarter
        grid = np.geomspace(cutoff / 4, cutoff, 24)
        counts = np.searchsorted(eigs, grid, side="left")
        slack = fit_constant(np.column_stack([grid, counts]), "count", curve)
    Z, tail = heat_trace(eigs, cutoff, ts, n0=curve, slack=slack, count_below_cutoff=K)
    z0 = curve.z0(ts)
    C = fit_constant(np.column_stack([ts, Z]), "heat", curve.z0)
    rows = [{"t": float(t), "Z": float(z), "tail_bound": float(tb), "Z0": float(p), "ratio": float(z / p)}
            for t, z, tb, p in zip(ts, Z, tail, z0)]
    cols = ("t", "Z", "tail_bound", "Z0", "ratio")
    prov = _provenance(cfg, model, H, validity=validity.as_dict(), cutoff=cutoff, eigenvalues_below_cutoff=K,
                       tail_slack=slack)
    return EquivalenceReport("heat", cols, rows, C, cfg.ceiling_c, C <= cfg.ceiling_c, prov)


def sobolev_half_width(rep: Representation, factor: float) -> float:
    """Half-width where ``inf_xi M_pi`` first reaches ``factor`` times its value at the origin."""
    base = float(np.min(position_weight(rep, np.zeros((1, rep.n)))))
    return truncation_half_width(rep, (factor * base / 2.0) ** 2)


def run_sobolev_check(cfg: ExperimentConfig, model=None) -> EquivalenceReport:
    """Ratios ``sum ||M_pi^{m-|a|} pi(X^a) u||^2 / ||u||_{m,pi}^2`` over a random ensemble."""
    model = build_model(cfg.model) if model is None else model
    if not isinstance(model, Representation):
        raise ValueError("the Sobolev check needs a representation model")
    check_model(model)
    so = cfg.sobolev
    for m in so.orders:
        if not 0 <= m <= 3:
            raise ValueError(f"order m={m} unsupported (0..3)")
    if so.functions < 1:
        raise ValueError("sobolev.functions must be positive")
    L = sobolev_half_width(model, so.box_factor)
    grid = GridSpec(model.n, L, so.m, cfg.grid.cap)
    sops = SobolevOperators(model, grid)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.sampling.seed, spawn_key=(3,)))
    funcs = [random_band_limited(grid, rng, so.n_modes) for _ in range(so.functions)]
    rows = []
    stats = {}
    for m in so.orders:
        ratios = np.array([sops.ratio(u, m) for u in funcs])
        rows.extend({"m": m, "function": i, "ratio": float(r)} for i, r in enumerate(ratios))
        stats[str(m)] = {"max": float(ratios.max()), "min": float(ratios.min()),
                         "mean": float(ratios.mean()), "median": float(np.median(ratios)),
                         "finite": bool(np.all(np.isfinite(ratios)))}
    passed = all(v["finite"] for v in stats.values())
    prov = _provenance(cfg, model, None, grid={"n": grid.n, "L": grid.L, "m": grid.m, "h": grid.h, "N": grid.size})
    return EquivalenceReport("sobolev", ("m", "function", "ratio"), rows, None, cfg.ceiling_c, passed, prov,
                             {"statistics": stats})


RUNNERS = {"count": run_count_experiment, "heat": run_heat_experiment, "sobolev": run_sobolev_check,
           "volume": run_volume}


def run_sweep(cfg: ExperimentConfig, kind: str = "count") -> tuple[EquivalenceReport, dict[float, EquivalenceReport]]:
    """Run one experiment per family parameter and compare the fitted constants.

    Passes when every member passes its ceiling and the fitted constants (or,
    for the Sobolev check, the maximal ratios) vary by less than a factor 2.
    """
    if kind not in ("count", "heat", "sobolev"):
        raise ValueError(f"cannot sweep experiment kind {kind!r}")
    params = cfg.sweep_parameters
    if not params:
        raise ValueError("sweep.parameters is empty")
    runner = RUNNERS[kind]
    members = [cfg.with_parameter(p) for p in params]
    if cfg.sampling.workers > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.sampling.workers, len(members))) as pool:
            reports = list(pool.map(runner, members))
    else:
        reports = [runner(c) for c in members]
    rows = []
    for p, rep in zip(params, reports):
        if kind == "sobolev":
            value = max(v["max"] for v in rep.extra["statistics"].values())
        else:
            value = rep.fitted_C
        rows.append({"parameter": p, "value": value, "pass": rep.passed})
    values = np.array([r["value"] for r in rows])
    variation = float(values.max() / values.min())
    passed = all(r["pass"] for r in rows) and variation < 2.0
    fitted = float(values.max()) if kind != "sobolev" else None
    prov = {"kind": kind, "members": [r.provenance for r in reports], "config_digest": cfg.digest()}
    report = EquivalenceReport(f"sweep-{kind}", ("parameter", "value", "pass"), rows, fitted, cfg.ceiling_c,
                               passed, prov, {"variation": variation})
    return report, dict(zip(params, reports))
