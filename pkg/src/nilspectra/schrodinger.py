"""Polynomial magnetic Schrodinger operators ``P = sum_j (D_j - A_j)^2 + V``.

Holds the curvature ``B_jk``, the scale function ``M(x)`` built from all
derivatives of ``V`` and ``B_jk``, and the test for directions along which the
whole model is translation invariant (which makes the spectrum non-discrete).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polynomial import DimensionError, MultiPoly, coefficient_matrix, differentiate, multi_indices

log = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-10


class DegenerateModelError(ValueError):
    """The model is invariant along some direction; its spectrum is not discrete."""

    def __init__(self, directions):
        self.directions = [np.asarray(d) for d in directions]
        pretty = ", ".join(np.array2string(d, precision=6) for d in self.directions)
        super().__init__(f"model is translation invariant along direction(s) {pretty}")


@dataclass(frozen=True)
class MagneticMatrix:
    B: tuple[tuple[MultiPoly, ...], ...]

    def __getitem__(self, jk):
        j, k = jk
        return self.B[j][k]

    @property
    def n(self) -> int:
        return len(self.B)

    def pairs(self):
        """Yield ``(j, k, B_jk)`` for ``j < k``."""
        for j in range(self.n):
            for k in range(j + 1, self.n):
                yield j, k, self.B[j][k]


@dataclass(frozen=True)
class SchrodingerModel:
    """The operator ``sum_j (D_j - A_j(x))^2 + V(x)`` on ``R^n``, ``D_j = -i d/dx_j``."""

    n: int
    A: tuple[MultiPoly, ...]
    V: MultiPoly
    r: int = -1
    V_square_root: MultiPoly | None = None
    _tables: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        A = tuple(self.A) if self.A else tuple(MultiPoly.zero(self.n) for _ in range(self.n))
        object.__setattr__(self, "A", A)
        if len(A) != self.n:
            raise DimensionError(f"expected {self.n} vector-potential components, got {len(A)}")
        for p in (*A, self.V):
            if p.nvars != self.n:
                raise DimensionError(f"polynomial in {p.nvars} variables for a model in dimension {self.n}")
        deg = max([self.V.degree(), *(a.degree() for a in A), 0])
        if self.r < 0:
            object.__setattr__(self, "r", deg)
        elif deg > self.r:
            raise ValueError(f"degree {deg} exceeds degree bound r={self.r}")

    @classmethod
    def from_square(cls, n: int, A: Sequence[MultiPoly], w: MultiPoly, r: int = -1) -> SchrodingerModel:
        """Model with ``V = w**2``, non-negative by construction."""
        return cls(n=n, A=tuple(A), V=w * w, r=r, V_square_root=w)

    def check_positivity(self, L: float = 5.0, pts: int = 41) -> float:
        """Spot-check ``V >= 0`` on a tensor grid; warns and returns the minimum."""
        if self.V_square_root is not None:
            return 0.0
        axes = [np.linspace(-L, L, pts)] * self.n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        vmin = float(np.min(self.V.evaluate(grid))) if not self.V.is_zero() else 0.0
        if vmin < 0:
            warnings.warn(f"V takes negative value {vmin:g} on the verification grid", stacklevel=2)
        return vmin

    # -- derivative tables, computed lazily once ----------------------------

    def _derivative_table(self):
        if "terms" not in self._tables:
            B = magnetic_matrix(self)
            polys: list[MultiPoly] = []
            weights: list[float] = []
            for alpha in multi_indices(self.n, self.r):
                inv = 1.0 / (sum(alpha) + 2)
                dv = differentiate(self.V, alpha)
                if not dv.is_zero():
                    polys.append(dv)
                    weights.append(inv)
                for _, _, b in B.pairs():
                    db = differentiate(b, alpha)
                    if not db.is_zero():
                        polys.append(db)
                        weights.append(inv)
            self._tables["terms"] = (polys, np.array(weights))
            self._tables["B"] = B
        return self._tables["terms"]


def magnetic_matrix(model: SchrodingerModel) -> MagneticMatrix:
    """``B_jk = dA_j/dx_k - dA_k/dx_j``."""
    n = model.n
    rows = []
    for j in range(n):
        row = []
        for k in range(n):
            if j == k:
                row.append(MultiPoly.zero(n))
            else:
                row.append(model.A[j].diff(k) - model.A[k].diff(j))
        rows.append(tuple(row))
    return MagneticMatrix(tuple(rows))


def m_weight(model: SchrodingerModel, x) -> np.ndarray | float:
    """``M(x)``; accepts one point or an array of points ``(..., n)``."""
    polys, weights = model._derivative_table()
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for p, w in zip(polys, weights):
        out = out + np.abs(p.evaluate(x)) ** w
    return out[()] if out.ndim == 0 else out


def magnetic_part(model: SchrodingerModel, x) -> np.ndarray | float:
    """Contribution of the ``B_jk`` derivatives to ``M(x)``."""
    B = magnetic_matrix(model)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for alpha in multi_indices(model.n, model.r):
        for _, _, b in B.pairs():
            db = differentiate(b, alpha)
            if not db.is_zero():
                out = out + np.abs(db.evaluate(x)) ** (1.0 / (sum(alpha) + 2))
    return out[()] if out.ndim == 0 else out


def m_symbol(model: SchrodingerModel, x, xi):
    """``M(x, xi) = |xi| + M(x)``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != model.n:
        raise DimensionError(f"covector dimension {xi.shape[-1]} does not match n={model.n}")
    return np.linalg.norm(xi, axis=-1) + m_weight(model, x)


def degeneracy_directions(model: SchrodingerModel, rtol: float = DEGENERACY_RTOL) -> list[np.ndarray]:
    """Orthonormal basis of directions ``u`` with ``u.grad V == 0`` and ``u.grad B_jk == 0``."""
    n = model.n
    B = magnetic_matrix(model)
    blocks = []
    for target in [model.V, *(b for _, _, b in B.pairs())]:
        mat, _ = coefficient_matrix(target.gradient())
        if mat.size:
            blocks.append(mat)
    if not blocks:
        return [np.eye(n)[i] for i in range(n)]
    M = np.vstack(blocks)
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    basis = []
    for v in vt[rank:]:
        # deterministic sign: first non-negligible component positive
        v = v / np.linalg.norm(v)
        lead = np.flatnonzero(np.abs(v) > 1e-8)[0]
        if v[lead] < 0:
            v = -v
        basis.append(v)
    return basis


def require_nondegenerate(model: SchrodingerModel) -> None:
    dirs = degeneracy_directions(model)
    if dirs:
        raise DegenerateModelError(dirs)
