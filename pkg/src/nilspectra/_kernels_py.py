"""Pure-Python fallback for :mod:`nilspectra._kernels` (same contract, numpy-vectorized)."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=16)
def _offsets(b: int):
    # flat offsets (relative to row k) of the entries touched by step k, i >= j >= 1
    j, i = np.triu_indices(b, k=0)
    j = j + 1
    i = i + 1
    return i, j, j * (b + 1) + (i - j)


def _band_ldl(col: np.ndarray, shift: float, tiny: float):
    N, width = col.shape
    b = width - 1
    col[:, 0] -= shift
    flat = col.reshape(-1)
    neg = 0
    minpiv = math.inf
    cplx = np.iscomplexobj(col)
    ii, jj, off = _offsets(b) if b else (None, None, None)
    for k in range(N):
        d = col[k, 0].real
        ad = abs(d)
        if ad < minpiv:
            minpiv = ad
        if ad <= tiny:
            return neg, k, minpiv
        if d < 0:
            neg += 1
        lim = min(b, N - 1 - k)
        if lim == 0:
            continue
        if b == 1:
            v = col[k, 1]
            col[k + 1, 0] -= (v * v.conjugate()).real / d if cplx else v * v / d
            continue
        row = col[k]
        if lim == b:
            sel_i, sel_j, sel_off = ii, jj, off
        else:
            mask = ii <= lim
            sel_i, sel_j, sel_off = ii[mask], jj[mask], off[mask]
        vj = row[sel_j].conj() if cplx else row[sel_j]
        flat[k * width + sel_off] -= row[sel_i] * vj / d
    return neg, -1, minpiv


def band_ldl_inertia_real(col, shift, tiny):
    return _band_ldl(col, shift, tiny)


def band_ldl_inertia_complex(col, shift, tiny):
    return _band_ldl(col, shift, tiny)
