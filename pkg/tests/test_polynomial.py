import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilspectra.polynomial import (
    DimensionError,
    MultiPoly,
    arithmetic,
    coefficient_matrix,
    differentiate,
    evaluate,
    multi_indices,
    substitute_linear,
)

# dyadic coefficients keep every identity exact in floating point
dyadic = st.integers(-16, 16).map(lambda k: k / 4)


@st.composite
def polys(draw, nvars=2, max_deg=3, max_terms=5):
    n_terms = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n_terms):
        exp = tuple(draw(st.integers(0, max_deg)) for _ in range(nvars))
        terms[exp] = draw(dyadic)
    return MultiPoly(nvars, terms)


def x(i, n=2):
    return MultiPoly.variable(n, i)


class TestConstruction:
    def test_zero_terms_dropped(self):
        p = MultiPoly(2, {(1, 0): 0.0, (0, 1): 2.0})
        assert p.terms == {(0, 1): 2.0}

    def test_zero_polynomial(self):
        z = MultiPoly.zero(3)
        assert z.is_zero()
        assert z.degree() == -1
        assert evaluate(z, [1.0, 2.0, 3.0]) == 0.0

    def test_grlex_canonical_order(self):
        p = MultiPoly(2, {(0, 2): 1.0, (1, 0): 1.0, (2, 0): 1.0, (0, 0): 1.0, (1, 1): 1.0})
        assert list(p.terms) == [(0, 0), (1, 0), (0, 2), (1, 1), (2, 0)]

    def test_records_roundtrip(self):
        p = x(0) * x(1) + 3 * x(1) ** 2 - 1
        assert MultiPoly.from_records(2, p.to_records()) == p

    def test_records_accumulate_duplicates(self):
        p = MultiPoly.from_records(1, [{"exponents": [1], "coeff": 1.0}, {"exponents": [1], "coeff": 2.0}])
        assert p.coeff((1,)) == 3.0

    def test_wrong_exponent_length(self):
        with pytest.raises(DimensionError):
            MultiPoly(2, {(1,): 1.0})


class TestExamples:
    def test_evaluate_product_plus_one(self):
        assert evaluate(x(0) * x(1) + 1, [2.0, 5.0]) == 11.0

    def test_evaluate_vectorized(self):
        p = x(0) ** 2 + x(1)
        pts = np.array([[1.0, 2.0], [3.0, -1.0]])
        np.testing.assert_array_equal(p.evaluate(pts), [3.0, 8.0])

    def test_differentiate_multi_index(self):
        p = x(0) ** 3 * x(1) ** 2
        assert differentiate(p, (2, 1)) == 12 * x(0) * x(1)

    def test_differentiate_below_degree_vanishes(self):
        assert differentiate(x(0) ** 2, (3, 0)).is_zero()

    def test_arithmetic_ops(self):
        p, q = x(0) + 1, x(1) - 1
        assert arithmetic(p, q, "add") == p + q
        assert arithmetic(p, q, "sub") == p - q
        assert arithmetic(p, q, "mul") == x(0) * x(1) - x(0) + x(1) - 1
        with pytest.raises(ValueError):
            arithmetic(p, q, "/")

    def test_arithmetic_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            arithmetic(x(0, 1), x(0, 2), "+")

    def test_substitute_identity(self):
        p = x(0)
        assert substitute_linear(p, np.eye(2)) == p

    def test_substitute_rotation_quarter_turn(self):
        Q = np.array([[0.0, -1.0], [1.0, 0.0]])
        assert substitute_linear(x(0) ** 2, Q) == x(1) ** 2

    def test_substitute_scalar_dilation(self):
        t = 3.0
        assert substitute_linear(MultiPoly.variable(1, 0) ** 2, [[t]]) == MultiPoly.monomial((2,), t * t)

    def test_substitute_non_square(self):
        with pytest.raises(DimensionError):
            substitute_linear(x(0), np.ones((2, 3)))

    def test_integrate_inverts_diff(self):
        p = 3 * x(0) ** 2 * x(1) + x(1)
        assert p.integrate(0).diff(0) == p

    def test_multi_indices_count(self):
        # number of monomials of degree <= d in n variables is C(n+d, d)
        assert len(list(multi_indices(3, 4))) == math.comb(7, 4)

    def test_coefficient_matrix(self):
        mat, support = coefficient_matrix([x(0) + 2 * x(1), x(1)])
        assert mat.shape == (len(support), 2)
        np.testing.assert_array_equal(mat[support.index((0, 1))], [2.0, 1.0])


class TestProperties:
    @given(polys(), polys(), dyadic, dyadic, st.tuples(st.integers(0, 2), st.integers(0, 2)))
    def test_differentiation_linear(self, p, q, a, b, alpha):
        lhs = differentiate(p.scale(a) + q.scale(b), alpha)
        rhs = differentiate(p, alpha).scale(a) + differentiate(q, alpha).scale(b)
        assert lhs == rhs

    @given(polys(), polys(), st.integers(0, 1))
    def test_leibniz(self, p, q, i):
        assert (p * q).diff(i) == p.diff(i) * q + p * q.diff(i)

    @given(polys(max_deg=4))
    def test_mixed_partials_commute(self, p):
        assert p.diff(0).diff(1) == p.diff(1).diff(0)

    @settings(max_examples=50)
    @given(
        polys(),
        st.lists(st.floats(-2, 2), min_size=4, max_size=4),
        st.lists(st.floats(-2, 2), min_size=2, max_size=2),
    )
    def test_substitution_commutes_with_evaluation(self, p, q, pt):
        Q = np.array(q).reshape(2, 2)
        pt = np.array(pt)
        lhs = evaluate(substitute_linear(p, Q), pt)
        rhs = evaluate(p, Q @ pt)
        scale = sum(abs(c) for c in p.terms.values()) * 4.0**p.degree() if not p.is_zero() else 1.0
        assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), scale)

    @given(polys(), polys())
    def test_addition_commutes(self, p, q):
        assert p + q == q + p

    @given(polys())
    def test_hash_consistent_with_eq(self, p):
        assert hash(p) == hash(MultiPoly(2, p.terms))
