"""Heat trace from a truncated spectrum, with a separately reported tail bound."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import SpectralInconsistencyError

_LAGUERRE = np.polynomial.laguerre.laggauss(64)


def tail_bound(t, cutoff: float, n0: Callable, slack: float = 1.0):
    """``slack * int_cutoff^inf t e^{-ts} N0(slack * s) ds`` by Gauss-Laguerre in ``u = t (s - cutoff)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u, w = _LAGUERRE
    s = cutoff + u[None, :] / t[:, None]
    vals = np.asarray(n0(slack * s.ravel()), dtype=float).reshape(s.shape)
    return slack * np.exp(-t * cutoff) * (vals @ w)


def heat_trace(eigs, cutoff: float, t, n0: Callable | None = None, slack: float = 1.0,
               count_below_cutoff: int | None = None):
    """``(sum_{lam_j < cutoff} exp(-t lam_j), tail_bound)``.

    ``count_below_cutoff`` (from an inertia count) certifies that ``eigs`` holds
    the complete spectrum below the cutoff.  Without ``n0`` the tail bound is NaN.
    """
    eigs = np.sort(np.asarray(eigs, dtype=float))
    kept = eigs[eigs < cutoff]
    if count_below_cutoff is not None and count_below_cutoff != len(kept):
        raise SpectralInconsistencyError(
            f"{len(kept)} eigenvalues supplied below {cutoff:g} but the inertia count is {count_below_cutoff}"
        )
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    value = np.exp(-np.outer(t_arr, kept)).sum(axis=1)
    tail = tail_bound(t_arr, cutoff, n0, slack) if n0 is not None else np.full_like(t_arr, np.nan)
    if np.ndim(t) == 0:
        return float(value[0]), float(tail[0])
    return value, tail
