"""Representation Sobolev norms ``||u||_{m,pi}`` and the weighted left-hand side.

``pi(X^alpha)`` is applied as a composition of discretized first-order
operators ``sum_k (D_k a_k + a_k D_k)/2 + i b`` with centered differences.
"""

from __future__ import annotations

from itertools import product

import numpy as np
import scipy.sparse as sp

from ..nilpotent import PolyDiffOp, Representation, m_pi_inf
from .grid import GridSpec, centered_difference

MAX_ORDER = 3


def discrete_generator(grid: GridSpec, op: PolyDiffOp) -> sp.csr_matrix:
    pts = grid.points
    out = sp.diags(1j * np.broadcast_to(op.b.evaluate(pts), (grid.size,)).astype(complex), format="csr")
    for k, ak in enumerate(op.a):
        if ak.is_zero():
            continue
        D = centered_difference(grid, k)
        A = sp.diags(np.broadcast_to(ak.evaluate(pts), (grid.size,)))
        out = out + 0.5 * (D @ A + A @ D)
    return sp.csr_matrix(out)


class SobolevOperators:
    """Discrete ``pi(X_j)`` and the weight ``M_pi(x)`` on a fixed grid."""

    def __init__(self, rep: Representation, grid: GridSpec):
        if rep.n != grid.n:
            raise ValueError(f"representation acts on R^{rep.n}, grid is {grid.n}-dimensional")
        self.rep = rep
        self.grid = grid
        self.ops = [discrete_generator(grid, g) for g in rep.generators[: rep.p]]
        self.weight = np.asarray(m_pi_inf(rep, grid.points), dtype=float)

    def words(self, u: np.ndarray, m: int) -> dict[tuple[int, ...], np.ndarray]:
        """``pi(X^alpha) u`` for every word ``alpha`` of length at most ``m``."""
        if not 0 <= m <= MAX_ORDER:
            raise ValueError(f"order m={m} unsupported (0..{MAX_ORDER})")
        out = {(): np.asarray(u, dtype=complex).reshape(-1)}
        for length in range(1, m + 1):
            for word in product(range(self.rep.p), repeat=length):
                out[word] = self.ops[word[0]] @ out[word[1:]]
        return out

    def sobolev_norm(self, u, m: int) -> float:
        w = self.words(u, m)
        total = sum(np.vdot(v, v).real for word, v in w.items() if len(word) == m)
        return float(np.sqrt(self.grid.l2_weight() * total))

    def weighted_side(self, u, m: int) -> float:
        w = self.words(u, m)
        total = 0.0
        for word, v in w.items():
            wv = self.weight ** (m - len(word)) * v
            total += np.vdot(wv, wv).real
        return float(self.grid.l2_weight() * total)

    def ratio(self, u, m: int) -> float:
        w = self.words(u, m)
        top = 0.0
        bottom = 0.0
        for word, v in w.items():
            wv = self.weight ** (m - len(word)) * v
            top += np.vdot(wv, wv).real
            if len(word) == m:
                bottom += np.vdot(v, v).real
        return float(top / bottom) if bottom > 0 else (1.0 if top == 0 else np.inf)


def sobolev_norm(rep: Representation, u, m: int, grid: GridSpec) -> float:
    check_band_limited(u, grid)
    return SobolevOperators(rep, grid).sobolev_norm(u, m)


def weighted_side(rep: Representation, u, m: int, grid: GridSpec) -> float:
    check_band_limited(u, grid)
    return SobolevOperators(rep, grid).weighted_side(u, m)


def check_band_limited(u, grid: GridSpec, margin: float = 0.05, cutoff: float = 0.125, tol: float = 1e-8) -> None:
    """Reject test functions touching the outer ``margin`` of the box or carrying
    more than ``tol`` of their energy above ``cutoff`` times the grid Nyquist band."""
    v = np.asarray(u).reshape(grid.shape)
    energy = float(np.sum(np.abs(v) ** 2))
    if energy == 0:
        return
    inner = np.abs(grid.axis) <= (1 - margin) * grid.L
    mask = np.ones(grid.shape, dtype=bool)
    for k in range(grid.n):
        shape = [1] * grid.n
        shape[k] = grid.m
        mask &= inner.reshape(shape)
    if np.sum(np.abs(v[~mask]) ** 2) > tol * energy:
        raise ValueError(f"test function is not supported inside the inner {1 - margin:.0%} of the box")
    spec = np.abs(np.fft.fftn(v)) ** 2
    freq = np.abs(np.fft.fftfreq(grid.m))  # cycles per sample, Nyquist = 0.5
    high = np.zeros(grid.shape, dtype=bool)
    for k in range(grid.n):
        shape = [1] * grid.n
        shape[k] = grid.m
        high |= (freq > 0.5 * cutoff).reshape(shape)
    if spec[high].sum() > tol * spec.sum():
        raise ValueError("test function is not band-limited on this grid")


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def random_band_limited(grid: GridSpec, rng: np.random.Generator, n_modes: int = 8, margin: float = 0.05) -> np.ndarray:
    """Smooth random function: compactly supported bump times a random trigonometric sum."""
    R = (1 - 2 * margin) * grid.L
    pts = grid.points / R
    u = np.ones(grid.size, dtype=complex)
    for k in range(grid.n):
        u *= _bump(pts[:, k])
    coeffs = (rng.standard_normal((2 * n_modes + 1,) * grid.n) + 1j * rng.standard_normal((2 * n_modes + 1,) * grid.n))
    freqs = np.arange(-n_modes, n_modes + 1)
    series = np.zeros(grid.size, dtype=complex)
    for idx in np.ndindex(coeffs.shape):
        kvec = freqs[list(idx)]
        series += coeffs[idx] / (1.0 + np.linalg.norm(kvec)) * np.exp(0.5j * np.pi * pts @ kvec)
    return u * series
