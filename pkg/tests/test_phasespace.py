import math

import numpy as np
import pytest

from nilspectra.errors import UnboundedSublevelError
from nilspectra.nilpotent import builtin
from nilspectra.phasespace import (
    N0Curve,
    WeightEvaluator,
    bounding_box,
    default_s_nodes,
    log_interp,
    n0_curve,
    n0_estimate,
    n0_grid_oracle,
    z0_direct,
    z0_estimate,
)
from nilspectra.polynomial import MultiPoly
from nilspectra.schrodinger import SchrodingerModel
from oracles import heisenberg_n0, heisenberg_z0


def heis(mu=1.0):
    return WeightEvaluator.from_representation(builtin("heisenberg", mu))


@pytest.fixture(scope="module")
def heis_curve():
    w = heis()
    return n0_curve(w, default_s_nodes(w, 0.1), 200_000, seed=3)


class TestBox:
    def test_unbounded_weight_rejected(self):
        w = WeightEvaluator(lambda x, xi: np.linalg.norm(xi, axis=-1), 1, "free")
        with pytest.raises(UnboundedSublevelError):
            bounding_box(w, 4.0)

    def test_heisenberg_box_contains_diamond(self):
        box = bounding_box(heis(), 16.0)
        assert box.x_half_width >= 2.0
        np.testing.assert_array_equal(box.hi[1:], [4.0])

    def test_harmonic_box_grows_like_sqrt(self):
        w = WeightEvaluator.from_schrodinger(SchrodingerModel(n=1, A=(), V=MultiPoly.variable(1, 0) ** 2))
        small, large = bounding_box(w, 1e2).x_half_width, bounding_box(w, 1e4).x_half_width
        # w(x, 0) ~ |x|, so the half-width tracks sqrt(lambda) up to the doubling granularity
        assert 5 <= large / small <= 20

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            bounding_box(heis(), 0.0)


class TestVolume:
    @pytest.mark.parametrize("ratio", [9.0, 16.0, 64.0])
    def test_heisenberg_closed_form(self, ratio):
        for mu in (1.0, 4.0):
            est = n0_estimate(heis(mu), ratio * mu, 400_000, seed=11)
            exact = heisenberg_n0(ratio * mu, mu)
            assert abs(est.value - exact) <= 3 * est.stderr

    def test_grid_oracle(self):
        assert n0_grid_oracle(heis(), 16.0, 512) == pytest.approx(8.0, abs=0.08)

    def test_grid_oracle_dimension_limit(self):
        w = WeightEvaluator(lambda x, xi: np.linalg.norm(x, axis=-1) + np.linalg.norm(xi, axis=-1), 3, "cone")
        with pytest.raises(ValueError):
            n0_grid_oracle(w, 1.0)

    def test_oracle_agrees_with_mc_on_random_lambdas(self):
        rng = np.random.default_rng(5)
        w = heis()
        for lam in rng.uniform(5, 80, size=10):
            est = n0_estimate(w, lam, 200_000, seed=int(lam * 1000))
            grid = n0_grid_oracle(w, lam, 256)
            # O(h) oracle: allow its own discretization error on top of the MC band
            assert abs(est.value - grid) <= 3 * est.stderr + 0.01 * grid + 0.05

    def test_below_minimum_is_empty(self):
        est = n0_estimate(heis(4.0), 15.0, 10_000)
        assert est.value == 0.0 and est.hits == 0

    def test_monotone_in_lambda(self):
        w = heis()
        lams = np.geomspace(4.5, 100, 12)
        ests = [n0_estimate(w, lam, 100_000, seed=i) for i, lam in enumerate(lams)]
        for a, b in zip(ests, ests[1:]):
            assert a.value <= b.value + 3 * (a.stderr + b.stderr)

    def test_deterministic_and_worker_independent(self):
        w = heis()
        a = n0_estimate(w, 30.0, 300_000, seed=9, workers=1)
        b = n0_estimate(w, 30.0, 300_000, seed=9, workers=4)
        c = n0_estimate(w, 30.0, 300_000, seed=9, workers=3)
        assert a == b == c

    def test_scale_covariance(self):
        lam, mu, t = 20.0, 1.0, 2.0
        a = n0_estimate(heis(mu), lam, 200_000, seed=1)
        b = n0_estimate(heis(t * t * mu), t * t * lam, 200_000, seed=2)
        assert heisenberg_n0(lam, mu) == pytest.approx(heisenberg_n0(t * t * lam, t * t * mu), rel=1e-14)
        assert abs(a.value - b.value) <= 3 * (a.stderr + b.stderr)

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            n0_estimate(heis(), 10.0, 10)


class TestInterpolation:
    def test_power_law_exact(self):
        xp = np.array([1.0, 2.0, 4.0])
        fp = xp ** 1.5
        assert log_interp(3.0, xp, fp) == pytest.approx(3.0 ** 1.5, rel=1e-12)
        assert log_interp(8.0, xp, fp) == pytest.approx(8.0 ** 1.5, rel=1e-12)

    def test_zero_below_support(self):
        xp = np.array([1.0, 2.0, 4.0])
        fp = np.array([0.0, 1.0, 3.0])
        assert log_interp(0.5, xp, fp) == 0.0
        # across a zero the interpolation is linear in log(x)
        assert log_interp(1.5, xp, fp) == pytest.approx(math.log2(1.5), rel=1e-12)


class TestZ0:
    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0])
    def test_layer_cake_against_closed_form(self, heis_curve, t):
        assert heis_curve.z0(t)[0] == pytest.approx(heisenberg_z0(t), rel=0.02)

    def test_against_direct_monte_carlo(self, heis_curve):
        direct, err = z0_direct(heis(), 1.0, 1_000_000, seed=4)
        assert abs(heis_curve.z0(1.0)[0] / direct - 1) < 0.03
        assert direct == pytest.approx(heisenberg_z0(1.0), abs=4 * err)

    def test_decreasing(self, heis_curve):
        vals = heis_curve.z0(np.array([0.1, 0.2, 0.5, 1.0, 2.0]))
        assert np.all(np.diff(vals) < 0)

    def test_decay_bound(self, heis_curve):
        m0 = 2.0
        for t in (2.0, 4.0):
            assert heis_curve.z0(t)[0] <= math.exp(-t * m0 * m0 / 2) * heis_curve.z0(t / 2)[0]

    def test_estimate_wrapper(self, heis_curve):
        assert z0_estimate(heis(), 1.0, curve=heis_curve) == heis_curve.z0(1.0)[0]
        with pytest.raises(ValueError):
            z0_estimate(heis(), 0.0, curve=heis_curve)

    def test_piecewise_linear_exact_for_linear_n0(self):
        # N0(s) = s gives Z0(t) = 1/t in the limit of an unbounded grid
        s = np.geomspace(1e-6, 1e4, 200)
        curve = N0Curve(s, s.copy())
        assert curve.z0(1.0)[0] == pytest.approx(1.0, rel=1e-4)
