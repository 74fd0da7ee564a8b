"""Lowest eigenvalues by shift-invert Lanczos with full reorthogonalization."""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, SpectralInconsistencyError
from .grid import HermitianOperatorGrid
from .inertia import gershgorin_bounds, inertia_count

log = logging.getLogger(__name__)


def _lanczos_ritz(apply, N, dtype, nwant, tol_fn, max_steps, seed):
    """Run Lanczos on the operator ``apply`` until ``tol_fn`` accepts ``nwant`` top Ritz pairs."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(N)
    if np.issubdtype(dtype, np.complexfloating):
        q = q + 1j * rng.standard_normal(N)
    q = q.astype(dtype) / np.linalg.norm(q)
    Q = np.zeros((N, max_steps + 1), dtype=dtype)
    Q[:, 0] = q
    alpha = np.zeros(max_steps)
    beta = np.zeros(max_steps)
    check_every = max(4, nwant // 2)
    for j in range(max_steps):
        w = apply(Q[:, j])
        alpha[j] = np.real(np.vdot(Q[:, j], w))
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        steps = j + 1
        exhausted = beta[j] <= 1e-14 * max(abs(alpha[j]), 1.0)
        if steps >= nwant and (steps % check_every == 0 or exhausted or steps == max_steps):
            theta, S = scipy.linalg.eigh_tridiagonal(alpha[:steps], beta[: steps - 1])
            order = np.argsort(theta)[::-1][:nwant]
            Y = Q[:, :steps] @ S[:, order]
            if tol_fn(theta[order], Y) or exhausted or steps == max_steps:
                return theta[order], Y, steps
        if exhausted:
            break
        Q[:, j + 1] = w / beta[j]
    raise ConvergenceError("Lanczos basis exhausted before any Ritz values were available")


def lowest_eigs(H, K: int, tol: float = 1e-8, max_steps: int | None = None, seed: int = 0,
                validate: bool = True, return_vectors: bool = False):
    """The ``K`` smallest eigenvalues of a sparse Hermitian operator, ascending.

    Converged means every residual ``||H y - lam y||`` is below ``tol * ||H||``.
    With ``validate`` the result is checked against an inertia count placed
    half-way between the ``K``-th and ``K+1``-th eigenvalue.
    """
    op = H if isinstance(H, HermitianOperatorGrid) else HermitianOperatorGrid(sp.csr_matrix(H), grid=None)
    A = op.matrix
    N = op.N
    if K < 1:
        return (np.array([]), np.zeros((N, 0))) if return_vectors else np.array([])
    if K > N // 4:
        raise ValueError(f"K={K} exceeds N/4={N // 4}")
    norm = op.norm_bound
    lo, _ = gershgorin_bounds(op)
    sigma = lo - 1e-6 * max(norm, 1.0)
    lu = spla.splu(sp.csc_matrix(A - sigma * sp.identity(N, format="csc")))
    dtype = np.complex128 if op.is_complex else np.float64
    nwant = min(K + 1, N)
    if max_steps is None:
        max_steps = min(N, max(6 * nwant, nwant + 60))

    def residuals_ok(theta, Y):
        lam = sigma + 1.0 / theta
        res = np.linalg.norm(A @ Y - Y * lam, axis=0)
        return bool(np.all(res <= tol * norm))

    theta, Y, steps = _lanczos_ritz(lu.solve, N, dtype, nwant, residuals_ok, max_steps, seed)
    lam = sigma + 1.0 / theta
    res = np.linalg.norm(A @ Y - Y * lam, axis=0)
    if np.any(res[:K] > tol * norm):
        raise ConvergenceError(f"Lanczos did not converge in {steps} steps (max residual {res[:K].max():.3g})")
    order = np.argsort(lam)
    lam, Y = lam[order], Y[:, order]
    log.debug("lanczos: %d eigenvalues in %d steps", K, steps)
    if validate:
        if len(lam) > K:
            cut = 0.5 * (lam[K - 1] + lam[K])
        else:
            cut = lam[K - 1] + 1e-6 * max(abs(lam[K - 1]), 1.0)
        count = inertia_count(op, cut)
        if count != K:
            raise SpectralInconsistencyError(f"inertia finds {count} eigenvalues below {cut:.6g}, Lanczos returned {K}")
    if return_vectors:
        return lam[:K], Y[:, :K]
    return lam[:K]


def eigs_below(H, cutoff: float, **kw) -> np.ndarray:
    """Every eigenvalue below ``cutoff``, the count certified by inertia."""
    K = inertia_count(H, cutoff)
    lam = lowest_eigs(H, K, **kw)
    if K and lam[-1] >= cutoff:
        raise SpectralInconsistencyError(f"eigenvalue {lam[-1]:.6g} is not below the cutoff {cutoff:.6g}")
    return lam
