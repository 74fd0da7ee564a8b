"""Spectral asymptotics for Schrodinger operators and nilpotent-group sublaplacians."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    FactorizationError,
    GridCapError,
    InfeasibleFitError,
    NumericalError,
    SpectralInconsistencyError,
    UnboundedSublevelError,
    ValidityError,
)
from .nilpotent import (
    PolyDiffOp,
    Representation,
    StratifiedAlgebra,
    builtin,
    homogeneous_norm,
    iterated_commutator,
    m_pi,
    m_pi_inf,
    orbit_form,
    sublaplacian_ops,
    validate_algebra,
)
from .phasespace import N0Curve, VolumeEstimate, WeightEvaluator, n0_estimate, z0_estimate
from .polynomial import MultiPoly
from .schrodinger import (
    DegenerateModelError,
    SchrodingerModel,
    degeneracy_directions,
    magnetic_matrix,
    m_symbol,
    m_weight,
)
from .spectral import GridSpec, HermitianOperatorGrid, assemble, heat_trace, inertia_count, lowest_eigs
