"""Eigenvalue counts from matrix inertia (Sylvester's law).

Narrow-band matrices go through the banded LDL^H kernel; small or wide ones
through a dense Bunch-Kaufman factorization.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .. import kernels
from ..errors import FactorizationError
from .grid import HermitianOperatorGrid, to_band

log = logging.getLogger(__name__)

DENSE_LIMIT = 600
PIVOT_RTOL = 1e-12
RETRIES = 3


def _as_grid_operator(H) -> HermitianOperatorGrid | np.ndarray:
    if isinstance(H, HermitianOperatorGrid) or isinstance(H, np.ndarray):
        return H
    if sp.issparse(H):
        return HermitianOperatorGrid(sp.csr_matrix(H), grid=None)
    return np.asarray(H)


def _dense_negative_count(A: np.ndarray, lam: float, tiny: float):
    M = A - lam * np.eye(A.shape[0], dtype=A.dtype)
    _, d, _ = scipy.linalg.ldl(M, lower=True, hermitian=True)
    neg = 0
    smallest = np.inf
    i = 0
    n = d.shape[0]
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0:
            ev = np.linalg.eigvalsh(d[i : i + 2, i : i + 2])
            i += 2
        else:
            ev = np.array([d[i, i].real])
            i += 1
        neg += int(np.sum(ev < 0))
        smallest = min(smallest, float(np.min(np.abs(ev))))
    return neg, smallest > tiny


def _band_negative_count(col: np.ndarray, lam: float, tiny: float):
    if np.iscomplexobj(col):
        neg, broke, _ = kernels.band_ldl_inertia_complex(col, lam, tiny)
    else:
        neg, broke, _ = kernels.band_ldl_inertia_real(col, lam, tiny)
    return neg, broke < 0


def inertia_count(H, lam: float, method: str = "auto") -> int:
    """Number of eigenvalues of ``H`` strictly below ``lam``.

    A near-zero pivot means ``lam`` sits (numerically) on an eigenvalue or the
    unpivoted band factorization hit a bad pivot; ``lam`` is then nudged up by
    ``1e-8`` relative, at most three times.
    """
    H = _as_grid_operator(H)
    if isinstance(H, np.ndarray):
        N = H.shape[0]
        norm = float(np.max(np.sum(np.abs(H), axis=1))) if N else 0.0
        dense = H
        band_ok = False
    else:
        N = H.N
        norm = H.norm_bound
        dense = None
        band_ok = True
    if N == 0:
        return 0
    if method == "auto":
        wide = not band_ok or H.bandwidth > N // 4
        method = "dense" if (N <= DENSE_LIMIT or wide) else "band"
    if method not in ("dense", "band"):
        raise ValueError(f"unknown inertia method {method!r}")
    if method == "band" and not band_ok:
        band = to_band(dense)
    tiny = PIVOT_RTOL * max(norm, abs(lam), 1e-300)
    shift = float(lam)
    for attempt in range(RETRIES + 1):
        if method == "dense":
            if dense is None:
                dense = H.matrix.toarray()
            neg, ok = _dense_negative_count(dense, shift, tiny)
        else:
            col = H.band() if band_ok else band.copy()
            neg, ok = _band_negative_count(col, shift, tiny)
        if ok:
            return int(neg)
        if attempt == RETRIES:
            break
        delta = 1e-8 * max(abs(shift), norm * 1e-8, 1e-300)
        log.debug("near-zero pivot at lambda=%r, retrying at %r", shift, shift + delta)
        shift += delta
    raise FactorizationError(f"inertia factorization broke down near lambda={lam!r} after {RETRIES} perturbations")


def inertia_counts(H, lams: Iterable[float], workers: int = 1, method: str = "auto") -> np.ndarray:
    """Counts for several shifts; shares the read-only operator across threads."""
    lams = [float(v) for v in lams]
    H = _as_grid_operator(H)
    if isinstance(H, HermitianOperatorGrid):
        H.band()  # populate the cache before threads start
    if workers <= 1 or len(lams) < 2:
        return np.array([inertia_count(H, v, method) for v in lams], dtype=int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda v: inertia_count(H, v, method), lams)), dtype=int)


def gershgorin_bounds(H) -> tuple[float, float]:
    A = H.matrix if isinstance(H, HermitianOperatorGrid) else sp.csr_matrix(H)
    diag = A.diagonal().real
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def eigenvalue_by_bisection(H, index: int, rtol: float = 1e-10, method: str = "auto") -> float:
    """The ``index``-th smallest eigenvalue (0-based) located by inertia bisection."""
    lo, hi = gershgorin_bounds(H)
    lo -= 1e-9 * max(abs(lo), 1.0)
    hi += 1e-9 * max(abs(hi), 1.0)
    scale = max(abs(lo), abs(hi), 1e-300)
    while hi - lo > rtol * scale:
        mid = 0.5 * (lo + hi)
        if inertia_count(H, mid, method) > index:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
