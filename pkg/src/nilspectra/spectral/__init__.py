"""Grid discretization, inertia counts, low eigenvalues, heat traces and Sobolev norms."""

from .grid import GridSpec, HermitianOperatorGrid, assemble
from .heat import heat_trace, tail_bound
from .inertia import eigenvalue_by_bisection, inertia_count, inertia_counts
from .lanczos import eigs_below, lowest_eigs
from .sobolev import random_band_limited, sobolev_norm, weighted_side
