import math

import numpy as np
import pytest
import scipy.sparse as sp

from nilspectra.errors import GridCapError, SpectralInconsistencyError
from nilspectra.nilpotent import PolyDiffOp, builtin
from nilspectra.polynomial import DimensionError, MultiPoly
from nilspectra.schrodinger import SchrodingerModel
from nilspectra.spectral import (
    GridSpec,
    assemble,
    eigenvalue_by_bisection,
    eigs_below,
    heat_trace,
    inertia_count,
    inertia_counts,
    lowest_eigs,
    sobolev_norm,
    tail_bound,
    weighted_side,
)
from nilspectra.spectral.grid import HermitianOperatorGrid, to_band
from nilspectra.spectral.inertia import gershgorin_bounds
from nilspectra.spectral.sobolev import SobolevOperators, check_band_limited, random_band_limited
from oracles import (
    QUARTIC_GROUND,
    dirichlet_laplacian_levels,
    harmonic_heat_trace,
    harmonic_levels,
    heisenberg_n0,
)

x1 = MultiPoly.variable(1, 0)


def harmonic_model():
    return SchrodingerModel(n=1, A=(), V=x1 * x1)


def random_hermitian(rng, n, complex_=False):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2


class TestGrid:
    def test_spacing_and_nodes(self):
        g = GridSpec(1, 1.0, 9)
        assert g.h == 0.2
        np.testing.assert_allclose(g.axis, np.linspace(-0.8, 0.8, 9), atol=1e-15)

    def test_minimum_points(self):
        with pytest.raises(ValueError):
            GridSpec(1, 1.0, 7)

    def test_cap(self):
        with pytest.raises(GridCapError):
            GridSpec(3, 1.0, 200)

    def test_coarsened(self):
        g = GridSpec(2, 3.0, 41)
        c = g.coarsened()
        assert c.m == 20 and c.h == pytest.approx(2 * g.h)
        with pytest.raises(ValueError):
            c.coarsened()

    def test_points_last_axis_fastest(self):
        g = GridSpec(2, 1.0, 9)
        assert g.points.shape == (81, 2)
        assert g.points[1, 1] > g.points[0, 1] and g.points[1, 0] == g.points[0, 0]


class TestAssembly:
    def test_free_laplacian_matches_dst(self):
        g = GridSpec(1, 2.0, 50)
        H = assemble(SchrodingerModel(n=1, A=(), V=MultiPoly.zero(1)), g)
        np.testing.assert_allclose(np.linalg.eigvalsh(H.matrix.toarray()), dirichlet_laplacian_levels(50, 2.0),
                                   rtol=1e-12)

    def test_free_laplacian_stencil(self):
        g = GridSpec(1, 1.0, 10)
        H = assemble(SchrodingerModel(n=1, A=(), V=MultiPoly.zero(1)), g).matrix.toarray()
        h2 = g.h**2
        assert H[3, 3] == pytest.approx(2 / h2) and H[3, 4] == pytest.approx(-1 / h2)

    def test_real_without_field(self):
        H = assemble(harmonic_model(), GridSpec(1, 5.0, 64))
        assert not H.is_complex

    def test_hermitian_exact_with_field(self):
        x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
        model = SchrodingerModel(n=2, A=(y * y.scale(-0.5), x * x * y), V=x * x + y * y)
        H = assemble(model, GridSpec(2, 3.0, 24))
        assert H.is_complex
        assert H.hermitian_defect() == 0.0

    def test_sublaplacian_hermitian_exact(self):
        H = assemble(builtin("engel", 2.0), GridSpec(1, 4.0, 101))
        assert H.hermitian_defect() == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            assemble(harmonic_model(), GridSpec(2, 1.0, 10))

    def test_sublaplacian_equals_schrodinger(self):
        # heisenberg(mu) realizes -d^2 + mu^2 x^2
        g = GridSpec(1, 6.0, 201)
        a = assemble(builtin("heisenberg", 2.0), g).matrix.toarray()
        b = assemble(SchrodingerModel(n=1, A=(), V=(x1 * x1).scale(4.0)), g).matrix.toarray()
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_positive_semidefinite_kinetic_part(self):
        x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
        model = SchrodingerModel(n=2, A=(y.scale(-1.0), x), V=MultiPoly.zero(2))
        H = assemble(model, GridSpec(2, 2.0, 16)).matrix.toarray()
        assert np.linalg.eigvalsh(H)[0] > -1e-10

    def test_dump_matrix_market(self, tmp_path):
        import scipy.io

        H = assemble(harmonic_model(), GridSpec(1, 5.0, 20))
        path = tmp_path / "h.mtx"
        H.dump(path)
        back = scipy.io.mmread(str(path))
        assert abs(back - H.matrix).max() == 0

    def test_gauge_near_invariance(self):
        x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
        V = x * x + y * y
        phi = x * y
        grid = GridSpec(2, 6.0, 40)
        base = assemble(SchrodingerModel(n=2, A=(), V=V), grid)
        gauged = assemble(SchrodingerModel(n=2, A=tuple(phi.gradient()), V=V), grid)
        e0 = np.linalg.eigvalsh(base.matrix.toarray())[:8]
        e1 = np.linalg.eigvalsh(gauged.matrix.toarray())[:8]
        assert np.max(np.abs(e1 - e0) / e0) <= 0.01
        # the link phases integrate A exactly, so the discrete operators are unitarily equivalent
        np.testing.assert_allclose(e1, e0, rtol=1e-9)


class TestInertia:
    def test_random_symmetric_against_dense(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            A = random_hermitian(rng, 200)
            ev = np.linalg.eigvalsh(A)
            for lam in rng.uniform(ev[0] - 1, ev[-1] + 1, size=5):
                expected = int(np.sum(ev < lam))
                assert inertia_count(A, lam) == expected
                assert inertia_count(A, lam, method="band") == expected

    def test_random_hermitian_against_dense(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            A = random_hermitian(rng, 120, complex_=True)
            ev = np.linalg.eigvalsh(A)
            for lam in rng.uniform(ev[0], ev[-1], size=5):
                assert inertia_count(A, lam) == int(np.sum(ev < lam))
                assert inertia_count(A, lam, method="band") == int(np.sum(ev < lam))

    def test_banded_large(self):
        rng = np.random.default_rng(2)
        n, b = 900, 6
        A = np.zeros((n, n))
        for k in range(b + 1):
            diag = rng.standard_normal(n - k)
            A += np.diag(diag, k) + (np.diag(diag, -k) if k else 0)
        ev = np.linalg.eigvalsh(A)
        H = sp.csr_matrix(A)
        for lam in np.quantile(ev, [0.1, 0.5, 0.9]) + 1e-3:
            assert inertia_count(H, lam) == int(np.sum(ev < lam))

    def test_harmonic_count(self):
        H = assemble(harmonic_model(), GridSpec(1, 12.0, 2399))
        assert inertia_count(H, 10.0) == 5

    def test_below_gershgorin(self):
        H = assemble(harmonic_model(), GridSpec(1, 12.0, 999))
        lo, _ = gershgorin_bounds(H)
        assert inertia_count(H, lo - 1.0) == 0

    def test_counts_monotone_and_total(self):
        H = assemble(builtin("engel", 2.0), GridSpec(1, 4.0, 801))
        lams = np.linspace(0.5, 500, 40)
        counts = inertia_counts(H, lams, workers=4)
        assert np.all(np.diff(counts) >= 0)
        assert np.array_equal(counts, inertia_counts(H, lams, workers=1))
        _, hi = gershgorin_bounds(H)
        assert inertia_count(H, hi + 1.0) == H.N

    def test_tie_retry(self):
        # lambda exactly on an eigenvalue: the perturbation retry resolves the count
        A = np.diag(np.arange(1.0, 801.0))
        assert inertia_count(sp.csr_matrix(A), 400.0) in (399, 400)

    def test_bisection(self):
        H = assemble(harmonic_model(), GridSpec(1, 10.0, 1999))
        assert eigenvalue_by_bisection(H, 2) == pytest.approx(5.0, abs=2e-3)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            inertia_count(np.eye(3), 0.5, method="qr")

    def test_to_band_layout(self):
        A = np.array([[4.0, 1.0, 0.0], [1.0, 5.0, 2.0], [0.0, 2.0, 6.0]])
        np.testing.assert_array_equal(to_band(A), [[4.0, 1.0], [5.0, 2.0], [6.0, 0.0]])


class TestEigensolver:
    def test_harmonic_oscillator(self):
        H = assemble(harmonic_model(), GridSpec(1, 12.0, 1201))
        lam = lowest_eigs(H, 10)
        np.testing.assert_allclose(lam, harmonic_levels(10), atol=6e-3)
        assert np.all(np.diff(lam) > 0)

    def test_quartic_ground_state(self):
        H = assemble(builtin("engel", 2.0), GridSpec(1, 6.0, 1199))
        assert lowest_eigs(H, 1)[0] == pytest.approx(QUARTIC_GROUND, abs=1e-4)

    def test_quartic_against_dense_coarse(self):
        H = assemble(builtin("engel", 2.0), GridSpec(1, 5.0, 301))
        dense = np.linalg.eigvalsh(H.matrix.toarray())[:5]
        np.testing.assert_allclose(lowest_eigs(H, 5), dense, rtol=1e-9)

    def test_inertia_cross_check(self):
        H = assemble(harmonic_model(), GridSpec(1, 10.0, 801))
        lam = lowest_eigs(H, 6)
        assert inertia_count(H, lam[-1] + 1e-6) == 6

    def test_residuals_and_vectors(self):
        H = assemble(builtin("heisenberg", 1.0), GridSpec(1, 8.0, 401))
        lam, Y = lowest_eigs(H, 4, return_vectors=True)
        res = np.linalg.norm(H.matrix @ Y - Y * lam, axis=0)
        assert np.all(res <= 1e-8 * H.norm_bound)

    def test_k_limit(self):
        H = assemble(harmonic_model(), GridSpec(1, 5.0, 40))
        with pytest.raises(ValueError):
            lowest_eigs(H, 11)

    def test_complex_operator(self):
        x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
        model = SchrodingerModel(n=2, A=(y.scale(-0.5), x.scale(0.5)), V=x * x + y * y)
        H = assemble(model, GridSpec(2, 5.0, 30))
        dense = np.linalg.eigvalsh(H.matrix.toarray())[:6]
        np.testing.assert_allclose(lowest_eigs(H, 6), dense, rtol=1e-8)

    def test_h2_convergence(self):
        errs = []
        for m in (199, 399):
            H = assemble(harmonic_model(), GridSpec(1, 10.0, m))
            errs.append(abs(lowest_eigs(H, 1)[0] - 1.0))
        assert 3.6 <= errs[0] / errs[1] <= 4.4

    def test_eigs_below(self):
        H = assemble(harmonic_model(), GridSpec(1, 12.0, 1201))
        lam = eigs_below(H, 20.0)
        assert len(lam) == 10


class TestHeatTrace:
    def test_closed_form(self):
        eigs = harmonic_levels(40)
        value, tail = heat_trace(eigs, 60.0, 1.0, n0=heisenberg_n0)
        assert value == pytest.approx(0.42546, abs=1e-5)
        assert value == pytest.approx(float(harmonic_heat_trace(1.0)), rel=1e-12)
        assert 0 < tail < 1e-6

    def test_tail_dominates_truncation(self):
        eigs = harmonic_levels(40)
        for t in (0.1, 0.2, 0.5):
            value, tail = heat_trace(eigs, 60.0, t, n0=heisenberg_n0)
            assert float(harmonic_heat_trace(t)) - value <= tail

    def test_vector_t_and_monotone(self):
        t = np.array([0.1, 0.5, 1.0, 2.0])
        value, tail = heat_trace(harmonic_levels(40), 60.0, t)
        assert np.all(np.diff(value) < 0)
        assert np.all(np.isnan(tail))

    def test_large_t_dominated_by_ground_state(self):
        eigs = harmonic_levels(40)
        t = 6.0
        value, _ = heat_trace(eigs, 60.0, t)
        assert abs(value - math.exp(-t)) / value < math.exp(-t * (eigs[1] - eigs[0]))

    def test_count_mismatch(self):
        with pytest.raises(SpectralInconsistencyError):
            heat_trace(harmonic_levels(5), 60.0, 1.0, count_below_cutoff=30)

    def test_nonpositive_t(self):
        with pytest.raises(ValueError):
            heat_trace(harmonic_levels(5), 60.0, 0.0)

    def test_tail_bound_slack_monotone(self):
        a = tail_bound(0.5, 60.0, heisenberg_n0, slack=1.0)
        b = tail_bound(0.5, 60.0, heisenberg_n0, slack=2.0)
        assert b > a > 0


@pytest.fixture(scope="module")
def setup():
    rep = builtin("heisenberg", 1.0)
    grid = GridSpec(1, 10.0, 1001)
    return rep, grid, SobolevOperators(rep, grid)


class TestSobolev:
    def test_gaussian_first_order(self, setup):
        rep, grid, ops = setup
        u = np.exp(-grid.axis**2 / 2)
        norm_u2 = grid.l2_weight() * np.sum(u * u)
        assert ops.sobolev_norm(u, 1) ** 2 == pytest.approx(norm_u2, rel=1e-3)
        ratio = ops.ratio(u, 1)
        assert np.isfinite(ratio) and ratio >= 1.0

    def test_order_zero_ratio_is_one(self, setup):
        rep, grid, ops = setup
        u = random_band_limited(grid, np.random.default_rng(0))
        assert ops.ratio(u, 0) == 1.0
        assert weighted_side(rep, u, 0, grid) == pytest.approx(sobolev_norm(rep, u, 0, grid) ** 2, rel=1e-14)

    def test_zero_function(self, setup):
        rep, grid, _ = setup
        u = np.zeros(grid.size)
        assert sobolev_norm(rep, u, 1, grid) == 0.0
        assert weighted_side(rep, u, 1, grid) == 0.0

    def test_spike_rejected(self, setup):
        rep, grid, _ = setup
        u = np.zeros(grid.size)
        u[grid.size // 2] = 1.0
        with pytest.raises(ValueError, match="band-limited"):
            check_band_limited(u, grid)

    def test_boundary_support_rejected(self, setup):
        _, grid, _ = setup
        u = np.exp(-((grid.axis - 9.8) ** 2) * 4)
        with pytest.raises(ValueError, match="inner"):
            check_band_limited(u, grid)

    def test_unsupported_order(self, setup):
        _, grid, ops = setup
        with pytest.raises(ValueError):
            ops.words(np.zeros(grid.size), 4)

    def test_ensemble_finite(self, setup):
        _, grid, ops = setup
        rng = np.random.default_rng(1)
        for _ in range(10):
            u = random_band_limited(grid, rng)
            check_band_limited(u, grid)
            for m in (1, 2):
                assert np.isfinite(ops.ratio(u, m))

    def test_generator_skew_adjoint(self, setup):
        _, grid, ops = setup
        for G in ops.ops:
            assert abs(G + G.conj().T).max() < 1e-12
