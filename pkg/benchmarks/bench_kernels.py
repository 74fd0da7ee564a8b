"""Time the compiled banded LDL^H inertia kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 2000 20000] [--bands 1 4 16] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from nilspectra import kernels
from nilspectra.spectral import GridSpec, assemble
from nilspectra.nilpotent import builtin


def random_band(rng, n, b):
    # diagonally dominant so the factorization never breaks down
    col = rng.standard_normal((n, b + 1))
    col[:, 0] = 2.0 * (b + 1) + np.abs(col[:, 0])
    return col


def bench(fn, col, repeat):
    return min(timeit.repeat(lambda: fn(col.copy(), 0.0, 1e-300), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 20000])
    ap.add_argument("--bands", type=int, nargs="+", default=[1, 4, 16])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled extension not available; build it with `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'N':>8} {'band':>5} {'compiled [s]':>13} {'python [s]':>11} {'speedup':>8}")
    cases = [(n, b, random_band(rng, n, b)) for n in args.sizes for b in args.bands]
    # a real operator: the quartic oscillator on a 1-D grid (tridiagonal)
    H = assemble(builtin("engel", 2.0), GridSpec(1, 6.0, 20001))
    cases.append((H.N, H.bandwidth, H.band()))
    for n, b, col in cases:
        fast = bench(kernels.compiled.band_ldl_inertia_real, col, args.repeat)
        slow = bench(kernels.python.band_ldl_inertia_real, col, args.repeat)
        print(f"{n:>8} {b:>5} {fast:>13.5f} {slow:>11.5f} {slow / fast:>8.1f}")


if __name__ == "__main__":
    main()
