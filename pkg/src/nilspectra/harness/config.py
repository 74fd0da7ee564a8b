"""Experiment configuration: a versioned TOML document.

Structure-constant quadruples and generator indices are 1-based in the file
and converted to 0-based on load.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..nilpotent import PolyDiffOp, Representation, StratifiedAlgebra, builtin, validate_algebra
from ..polynomial import MultiPoly
from ..schrodinger import SchrodingerModel

SPEC_VERSION = "1"
MODEL_KINDS = ("builtin", "schrodinger", "representation")


@dataclass(frozen=True)
class GeometricGrid:
    """``count`` geometric points in ``[min, max]``, or an explicit list."""

    min: float = 0.0
    max: float = 0.0
    count: int = 0
    values: tuple[float, ...] = ()
    scale_with_parameter: bool = False

    def points(self, scale: float = 1.0) -> np.ndarray:
        s = scale if self.scale_with_parameter else 1.0
        if self.values:
            return np.array(self.values, dtype=float) * s
        if self.count == 1:
            return np.array([self.min * s])
        return np.geomspace(self.min * s, self.max * s, self.count)


@dataclass(frozen=True)
class GridConfig:
    L: float | None = None
    m: int | None = None
    cap: int = 4_000_000

    @property
    def auto(self) -> bool:
        return self.L is None or self.m is None


@dataclass(frozen=True)
class SamplingConfig:
    samples: int = 1_000_000
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class HeatConfig:
    cutoff: float = 60.0
    slack: float | None = None


@dataclass(frozen=True)
class SobolevConfig:
    orders: tuple[int, ...] = (1, 2)
    functions: int = 100
    n_modes: int = 8
    box_factor: float = 8.0
    m: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    lambda_grid: GeometricGrid = GeometricGrid()
    t_grid: GeometricGrid = GeometricGrid()
    grid: GridConfig = GridConfig()
    sampling: SamplingConfig = SamplingConfig()
    output_dir: str = "out"
    ceiling_c: float = 10.0
    heat: HeatConfig = HeatConfig()
    sobolev: SobolevConfig = SobolevConfig()
    sweep_parameters: tuple[float, ...] = ()
    spec_version: str = SPEC_VERSION
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def parameter(self) -> float:
        return float(self.model.get("parameter", 1.0))

    def with_parameter(self, value: float) -> ExperimentConfig:
        if self.model.get("kind") != "builtin":
            raise ValueError("parameter sweeps need a builtin model")
        return replace(self, model={**self.model, "parameter": float(value)})

    def digest(self) -> str:
        """Stable hash of the effective configuration (for provenance)."""
        payload = json.dumps(_jsonable(self.raw), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _grid(section: dict | None, name: str) -> GeometricGrid:
    if not section:
        return GeometricGrid()
    if "values" in section:
        vals = tuple(float(v) for v in section["values"])
        if not vals or any(v <= 0 for v in vals):
            raise ValueError(f"{name}.values must be a nonempty list of positive numbers")
        return GeometricGrid(values=vals, scale_with_parameter=bool(section.get("scale_with_parameter", False)))
    try:
        lo, hi, count = float(section["min"]), float(section["max"]), int(section["count"])
    except KeyError as exc:
        raise ValueError(f"{name} needs 'values' or all of min/max/count (missing {exc.args[0]})") from None
    if count < 1 or not 0 < lo <= hi:
        raise ValueError(f"{name}: need count >= 1 and 0 < min <= max")
    if count > 1 and lo == hi:
        raise ValueError(f"{name}: min == max with count > 1")
    return GeometricGrid(lo, hi, count, (), bool(section.get("scale_with_parameter", False)))


def _poly(n: int, records) -> MultiPoly:
    return MultiPoly.from_records(n, records or [])


def build_model(model: dict):
    """The :class:`SchrodingerModel` or :class:`Representation` described by a model section."""
    kind = model.get("kind")
    if kind == "builtin":
        return builtin(str(model["name"]), float(model.get("parameter", 1.0)))
    if kind == "schrodinger":
        n = int(model["n"])
        A = tuple(_poly(n, rec) for rec in model.get("A", [[] for _ in range(n)]))
        r = int(model.get("r", -1))
        if "V_square_root" in model:
            w = _poly(n, model["V_square_root"])
            if "V" in model and _poly(n, model["V"]) != w * w:
                raise ValueError("V does not equal the square of V_square_root")
            return SchrodingerModel.from_square(n, A, w, r)
        return SchrodingerModel(n=n, A=A, V=_poly(n, model.get("V", [])), r=r)
    if kind == "representation":
        strata = [int(s) for s in model["strata"]]
        quads = [(int(i) - 1, int(j) - 1, int(k) - 1, float(v)) for i, j, k, v in model.get("structure", [])]
        if any(q < 0 for quad in quads for q in quad[:3]):
            raise ValueError("structure indices are 1-based")
        alg = StratifiedAlgebra.from_brackets(strata, quads)
        validate_algebra(alg).raise_if_failed()
        n = int(model["n"])
        ops = [PolyDiffOp(tuple(_poly(n, rec) for rec in g.get("a", [[] for _ in range(n)])), _poly(n, g.get("b", [])))
               for g in model["generators"]]
        name = str(model.get("name", "custom"))
        if len(ops) == alg.p:
            return Representation.from_stratum_one(alg, n, ops, name)
        return Representation(alg, n, ops, name)
    raise ValueError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")


def parse_config(doc: dict[str, Any]) -> ExperimentConfig:
    version = str(doc.get("spec_version", ""))
    if version != SPEC_VERSION:
        raise ValueError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION!r})")
    model = dict(doc.get("model") or {})
    if model.get("kind") not in MODEL_KINDS:
        raise ValueError(f"model.kind must be one of {MODEL_KINDS}")
    g = doc.get("grid") or {}
    grid = GridConfig(
        L=float(g["L"]) if "L" in g else None,
        m=int(g["m"]) if "m" in g else None,
        cap=int(g.get("cap", 4_000_000)),
    )
    if (grid.L is None) != (grid.m is None):
        raise ValueError("grid needs both L and m, or neither (automatic)")
    s = doc.get("sampling") or {}
    sampling = SamplingConfig(int(s.get("samples", 1_000_000)), int(s.get("seed", 0)), int(s.get("workers", 1)))
    if sampling.samples < 1000 or sampling.workers < 1:
        raise ValueError("sampling needs samples >= 1000 and workers >= 1")
    h = doc.get("heat") or {}
    heat = HeatConfig(float(h.get("cutoff", 60.0)), float(h["slack"]) if "slack" in h else None)
    so = doc.get("sobolev") or {}
    sobolev = SobolevConfig(
        orders=tuple(int(m) for m in so.get("orders", (1, 2))),
        functions=int(so.get("functions", 100)),
        n_modes=int(so.get("n_modes", 8)),
        box_factor=float(so.get("box_factor", 8.0)),
        m=int(so.get("m", 512)),
    )
    ceiling = float(doc.get("ceiling_c", 10.0))
    if ceiling < 1:
        raise ValueError("ceiling_c must be at least 1")
    sweep = tuple(float(v) for v in (doc.get("sweep") or {}).get("parameters", ()))
    return ExperimentConfig(
        model=model,
        lambda_grid=_grid(doc.get("lambda_grid"), "lambda_grid"),
        t_grid=_grid(doc.get("t_grid"), "t_grid"),
        grid=grid,
        sampling=sampling,
        output_dir=str((doc.get("output") or {}).get("dir", "out")),
        ceiling_c=ceiling,
        heat=heat,
        sobolev=sobolev,
        sweep_parameters=sweep,
        spec_version=version,
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return parse_config(doc)
