"""Two-sided equivalence constants between a spectral quantity and its proxy.

count mode: ``N0(x/C)/C <= N(x) <= C N0(C x)`` (proxy nondecreasing)
heat mode:  ``Z0(C x)/C <= Z(x) <= C Z0(x/C)`` (proxy nonincreasing)
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import InfeasibleFitError
from ..phasespace import log_interp

C_MAX = 1e6
RTOL = 1e-3
MODES = ("count", "heat")


def _proxy_callable(proxy) -> Callable:
    if callable(proxy):
        return proxy
    xs, vals = proxy
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(vals, dtype=float)
    return lambda x: log_interp(x, xs, vals)


def _violations(x: np.ndarray, y: np.ndarray, proxy: Callable, mode: str, C: float) -> np.ndarray:
    if mode == "count":
        lower = np.asarray(proxy(x / C), dtype=float) / C
        upper = C * np.asarray(proxy(x * C), dtype=float)
    else:
        lower = np.asarray(proxy(x * C), dtype=float) / C
        upper = C * np.asarray(proxy(x / C), dtype=float)
    # relative slack keeps exact equality (C = 1, y == proxy) feasible under rounding
    slack = 1e-12 * np.maximum(np.abs(y), 1.0)
    return (lower > y + slack) | (y > upper + slack)


def fit_constant(rows: Sequence[Sequence[float]], mode: str, proxy) -> float:
    """Smallest ``C`` in ``[1, 1e6]`` satisfying the two-sided bound on every row.

    ``rows`` are ``(x, observed)`` pairs with ``x`` the energy (count mode) or
    the time (heat mode).  ``proxy`` is a callable or a ``(nodes, values)``
    table interpolated log-linearly.  Bisection in ``log C`` stops at ``1e-3``
    relative width and returns the feasible end.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError("rows must be a nonempty list of (x, observed) pairs")
    x, y = arr[:, 0], arr[:, 1]
    if np.any(x <= 0) or np.any(y < 0):
        raise ValueError("abscissae must be positive and observed values non-negative")
    f = _proxy_callable(proxy)
    bad = _violations(x, y, f, mode, C_MAX)
    if np.any(bad):
        where = float(x[np.argmax(bad)])
        label = "lambda" if mode == "count" else "t"
        raise InfeasibleFitError(where, f"no constant up to {C_MAX:g} fits the row at {label}={where:g}")
    if not np.any(_violations(x, y, f, mode, 1.0)):
        return 1.0
    lo, hi = 0.0, math.log(C_MAX)
    while hi - lo > math.log1p(RTOL):
        mid = 0.5 * (lo + hi)
        if np.any(_violations(x, y, f, mode, math.exp(mid))):
            lo = mid
        else:
            hi = mid
    return math.exp(hi)
