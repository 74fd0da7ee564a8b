"""Box grids and Hermitian finite-difference assembly.

Each first-order factor is materialized as a sparse matrix ``F`` and its square
enters as ``F^H F``, so the assembled operator is Hermitian and (apart from the
potential) positive semidefinite by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from ..errors import GridCapError
from ..nilpotent import PolyDiffOp, Representation, sublaplacian_ops
from ..polynomial import DimensionError, MultiPoly
from ..schrodinger import SchrodingerModel

DEFAULT_CAP = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    """Interior nodes ``-L + h*(i+1)``, ``i < m``, of ``[-L, L]^n`` with Dirichlet walls."""

    n: int
    L: float
    m: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.m < 8:
            raise ValueError(f"need at least 8 points per dimension, got {self.m}")
        if not self.L > 0:
            raise ValueError("half-width L must be positive")
        if self.m**self.n > self.cap:
            raise GridCapError(f"{self.m}^{self.n} grid points exceeds cap {self.cap}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.m + 1)

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.m + 1)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, ``(size, n)``, last axis varying fastest."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=-1)

    def coarsened(self) -> GridSpec:
        """Same box with spacing doubled (requires ``m`` odd)."""
        if self.m % 2 == 0:
            raise ValueError("coarsening needs an odd number of points")
        return GridSpec(self.n, self.L, (self.m - 1) // 2, self.cap)

    def l2_weight(self) -> float:
        return self.h**self.n


@dataclass
class HermitianOperatorGrid:
    matrix: sp.csr_matrix
    grid: GridSpec
    provenance: str = ""
    _band: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix.data)

    @cached_property
    def bandwidth(self) -> int:
        coo = self.matrix.tocoo()
        return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0

    @cached_property
    def norm_bound(self) -> float:
        """Max absolute row sum, an upper bound for the spectral norm."""
        return float(np.max(np.asarray(abs(self.matrix).sum(axis=1)).ravel()))

    def band(self) -> np.ndarray:
        """Lower band storage ``col[j, d] = H[j + d, j]`` (fresh copy)."""
        if self._band is None:
            self._band = to_band(self.matrix, self.bandwidth)
        return self._band.copy()

    def hermitian_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def dump(self, path) -> None:
        """Write the matrix in Matrix Market coordinate format."""
        scipy.io.mmwrite(str(path), self.matrix, comment=self.provenance, symmetry="hermitian" if self.is_complex else "symmetric")


def to_band(A, b: int | None = None) -> np.ndarray:
    coo = sp.coo_matrix(A)
    if b is None:
        b = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    dtype = np.complex128 if np.iscomplexobj(coo.data) else np.float64
    col = np.zeros((coo.shape[0], b + 1), dtype=dtype)
    lower = coo.row >= coo.col
    np.add.at(col, (coo.col[lower], coo.row[lower] - coo.col[lower]), coo.data[lower])
    return col


# -- difference operators ---------------------------------------------------

def _links(grid: GridSpec, k: int):
    """Links along axis ``k`` including the two wall links of every line.

    Returns ``(tail, head, tail_pts, head_pts)`` where ``tail``/``head`` are node
    indices (``-1`` for a wall ghost) and the ``*_pts`` arrays hold coordinates.
    """
    m, n = grid.m, grid.n
    lines = np.arange(grid.size).reshape(grid.shape)
    lines = np.moveaxis(lines, k, -1).reshape(-1, m)  # each row is one line along axis k
    ghost = np.full((lines.shape[0], 1), -1)
    ext = np.concatenate([ghost, lines, ghost], axis=1)
    tail = ext[:, :-1].reshape(-1)
    head = ext[:, 1:].reshape(-1)
    base = grid.points[lines[:, 0]]  # coordinates of the first node on each line
    steps = np.arange(m + 2) - 1  # ghost at -1, then 0..m-1, ghost at m
    coords = np.repeat(base[:, None, :], m + 2, axis=1)
    coords[:, :, k] = grid.axis[0] + grid.h * steps[None, :]
    tail_pts = coords[:, :-1].reshape(-1, n)
    head_pts = coords[:, 1:].reshape(-1, n)
    return tail, head, tail_pts, head_pts


def _link_matrix(grid: GridSpec, k: int, head_coef, tail_coef) -> sp.csr_matrix:
    """Sparse map nodes -> links: ``(F u)_l = head_coef_l u_head + tail_coef_l u_tail``."""
    tail, head, _, _ = _links(grid, k)
    nl = len(tail)
    rows, cols, vals = [], [], []
    for idx, coef in ((head, head_coef), (tail, tail_coef)):
        keep = idx >= 0
        rows.append(np.nonzero(keep)[0])
        cols.append(idx[keep])
        vals.append(np.broadcast_to(coef, (nl,))[keep])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nl, grid.size))


def peierls_factor(grid: GridSpec, k: int, A: MultiPoly) -> sp.csr_matrix:
    """``D_k - A_k`` with the field entering as the exact link integral of ``A_k``."""
    tail, head, tp, hp = _links(grid, k)
    if A.is_zero():
        theta = np.zeros(len(tail))
    else:
        prim = A.integrate(k)
        theta = prim.evaluate(hp) - prim.evaluate(tp)
    h = grid.h
    head_coef = -1j * np.exp(-1j * theta) / h
    tail_coef = np.full(len(tail), 1j / h, dtype=complex)
    return _link_matrix(grid, k, head_coef, tail_coef)


def midpoint_factor(grid: GridSpec, k: int, a: MultiPoly, b: MultiPoly) -> sp.csr_matrix:
    """``-i a d/dx_k + b`` on links, derivative by difference, ``b`` at the link midpoint."""
    tail, head, tp, hp = _links(grid, k)
    mid = 0.5 * (tp + hp)
    av = np.broadcast_to(a.evaluate(mid), (len(tail),))
    bv = np.broadcast_to(b.evaluate(mid), (len(tail),))
    h = grid.h
    if b.is_zero():
        # -i a (u_head - u_tail)/h; the global phase -i drops out of F^H F
        return _link_matrix(grid, k, -av / h, av / h)
    return _link_matrix(grid, k, -1j * av / h + 0.5 * bv, 1j * av / h + 0.5 * bv)


def forward_difference(grid: GridSpec, k: int) -> sp.csr_matrix:
    """Node-to-node ``(u(x + h e_k) - u(x)) / h`` with zero beyond the wall."""
    d1 = sp.diags([-np.ones(grid.m), np.ones(grid.m - 1)], [0, 1], shape=(grid.m, grid.m)) / grid.h
    return _kron_axis(grid, k, d1)


def centered_difference(grid: GridSpec, k: int) -> sp.csr_matrix:
    """Node-to-node ``(u(x + h e_k) - u(x - h e_k)) / 2h``, antisymmetric."""
    d1 = sp.diags([-np.ones(grid.m - 1), np.ones(grid.m - 1)], [-1, 1], shape=(grid.m, grid.m)) / (2 * grid.h)
    return _kron_axis(grid, k, d1)


def _kron_axis(grid: GridSpec, k: int, d1) -> sp.csr_matrix:
    mats = [sp.identity(grid.m, format="csr")] * grid.n
    mats[k] = sp.csr_matrix(d1)
    out = mats[0]
    for mat in mats[1:]:
        out = sp.kron(out, mat, format="csr")
    return sp.csr_matrix(out)


def generator_factor(grid: GridSpec, op: PolyDiffOp) -> sp.csr_matrix:
    """Discretization of ``-i pi(X)`` as a map into links or nodes."""
    axes = [k for k, ak in enumerate(op.a) if not ak.is_zero()]
    pts = grid.points
    if not axes:
        return sp.diags(np.broadcast_to(op.b.evaluate(pts), (grid.size,)).astype(float), format="csr")
    if len(axes) == 1:
        k = axes[0]
        return midpoint_factor(grid, k, op.a[k], op.b)
    # several derivative directions: one-sided differences at nodes
    F = sp.diags(np.broadcast_to(op.b.evaluate(pts), (grid.size,)).astype(complex), format="csr")
    for k in axes:
        ak = np.broadcast_to(op.a[k].evaluate(pts), (grid.size,))
        F = F + (-1j) * sp.diags(ak) @ forward_difference(grid, k)
    return sp.csr_matrix(F)


def _gram(F: sp.csr_matrix) -> sp.csr_matrix:
    return sp.csr_matrix(F.conj().T @ F)


def assemble(op, grid: GridSpec) -> HermitianOperatorGrid:
    """Assemble a :class:`SchrodingerModel` or a representation's sublaplacian on ``grid``."""
    if isinstance(op, SchrodingerModel):
        if op.n != grid.n:
            raise DimensionError(f"model dimension {op.n} does not match grid dimension {grid.n}")
        H = sp.csr_matrix((grid.size, grid.size))
        for k in range(op.n):
            H = H + _gram(peierls_factor(grid, k, op.A[k]))
        if not op.V.is_zero():
            H = H + sp.diags(np.broadcast_to(op.V.evaluate(grid.points), (grid.size,)))
        provenance = f"schrodinger n={op.n} L={grid.L:g} m={grid.m}"
    else:
        ops: Sequence[PolyDiffOp] = sublaplacian_ops(op) if isinstance(op, Representation) else tuple(op)
        if any(o.nvars != grid.n for o in ops):
            raise DimensionError("operator variable count does not match grid dimension")
        H = sp.csr_matrix((grid.size, grid.size))
        for o in ops:
            H = H + _gram(generator_factor(grid, o))
        name = op.name if isinstance(op, Representation) else "sublaplacian"
        provenance = f"{name} L={grid.L:g} m={grid.m}"
    H = sp.csr_matrix(H)
    if np.iscomplexobj(H.data) and not np.any(H.data.imag):
        H = sp.csr_matrix(H.real)
    H.sum_duplicates()
    H.eliminate_zeros()
    H.sort_indices()
    return HermitianOperatorGrid(H, grid, provenance)
