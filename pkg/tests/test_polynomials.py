import numpy as np
import pytest

from wavetrefftz.polynomials import (
    Polynomial,
    coeff_vector,
    diff_matrix,
    from_coeff_vector,
    monomial_exponents,
    poly_compose_affine,
    poly_diff,
    poly_eval,
    vandermonde,
    wave_operator,
)


def p_of(dim, terms):
    return Polynomial(dim, terms)


class TestEval:
    def test_quadratic_at_point(self):
        # 2 t^2 + x^2 at (x=1, t=1) -> 3
        p = p_of(1, {(0, 2): 2.0, (2, 0): 1.0})
        assert poly_eval(p, [1.0, 1.0]) == pytest.approx(3.0)

    def test_zero_polynomial(self):
        assert poly_eval(Polynomial.zero(2), [0.3, -1.2, 4.0]) == 0.0

    def test_mixed_term_2d(self):
        # (t^2 + x^2) * y at (x=1, y=2, t=1) -> (1 + 1) * 2 = 4
        p = p_of(2, {(0, 1, 2): 1.0, (2, 1, 0): 1.0})
        assert poly_eval(p, [1.0, 2.0, 1.0]) == pytest.approx(4.0)

    def test_eval_many_matches_scalar(self):
        rng = np.random.default_rng(7)
        p = p_of(2, {(1, 2, 0): 0.5, (0, 0, 3): -2.0, (2, 0, 1): 1.25})
        pts = rng.uniform(-2, 2, size=(20, 3))
        vals = p.eval_many(pts)
        for row, v in zip(pts, vals):
            assert v == pytest.approx(p.eval(row), rel=1e-14, abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            poly_eval(p_of(1, {(1, 0): 1.0}), [1.0, 2.0, 3.0])


class TestDiff:
    def test_t_cubed(self):
        p = p_of(1, {(0, 3): 1.0})
        assert poly_diff(p, 1) == p_of(1, {(0, 2): 3.0})

    def test_spatial_derivative(self):
        # d/dx (a t^2 + x^2) = 2x, with a = 5
        p = p_of(1, {(0, 2): 5.0, (2, 0): 1.0})
        assert poly_diff(p, 0) == p_of(1, {(1, 0): 2.0})

    def test_second_time_derivative(self):
        # d^2/dt^2 (x^3 + 3 a t^2 x) = 6 a x, with a = 2
        p = p_of(1, {(3, 0): 1.0, (1, 2): 6.0})
        assert poly_diff(poly_diff(p, 1), 1) == p_of(1, {(1, 0): 12.0})

    def test_degree_drops_by_one(self):
        p = p_of(2, {(2, 1, 3): 1.0, (0, 0, 1): 2.0})
        assert poly_diff(p, 2).degree() == p.degree() - 1

    def test_var_out_of_range(self):
        with pytest.raises(ValueError):
            poly_diff(p_of(1, {(1, 0): 1.0}), 2)


class TestWaveOperator:
    def test_annihilates_characteristic_quadratic(self):
        # a t^2 + x^2 solves the wave equation for coefficient a
        a = 3.7
        p = p_of(1, {(0, 2): a, (2, 0): 1.0})
        assert wave_operator(p, a).is_zero()

    def test_linear_in_t(self):
        assert wave_operator(p_of(1, {(0, 1): 1.0}), 1.0).is_zero()

    def test_nonzero_residual(self):
        # L(x^2 t) = -2 t for a = 1
        p = p_of(1, {(2, 1): 1.0})
        assert wave_operator(p, 1.0) == p_of(1, {(0, 1): -2.0})

    def test_requires_positive_coefficient(self):
        with pytest.raises(ValueError):
            wave_operator(p_of(1, {(0, 1): 1.0}), 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        exps = monomial_exponents(3, 4)
        a = 2.5
        for _ in range(10):
            pa = from_coeff_vector(2, exps, rng.standard_normal(len(exps)))
            pb = from_coeff_vector(2, exps, rng.standard_normal(len(exps)))
            alpha, beta = rng.standard_normal(2)
            lhs = wave_operator(alpha * pa + beta * pb, a)
            rhs = alpha * wave_operator(pa, a) + beta * wave_operator(pb, a)
            assert lhs.allclose(rhs, rel=1e-14)

    def test_commutes_with_differentiation(self):
        # Exact sparse equality on exactly representable coefficients,
        # where every product is computed without rounding.
        rng = np.random.default_rng(4)
        exps = monomial_exponents(2, 5)
        p = from_coeff_vector(1, exps, rng.integers(-9, 10, size=len(exps)).astype(float))
        for var in (0, 1):
            assert poly_diff(wave_operator(p, 2.0), var) == wave_operator(poly_diff(p, var), 2.0)
        # Generic float coefficients agree up to rounding of the product order.
        q = from_coeff_vector(1, exps, rng.standard_normal(len(exps)))
        for var in (0, 1):
            assert poly_diff(wave_operator(q, 2.0), var).allclose(
                wave_operator(poly_diff(q, var), 2.0), rel=1e-14
            )


class TestComposeAffine:
    def test_linear(self):
        # x under scale (2, 1), shift (0.5, 0) -> 2x + 0.5
        p = p_of(1, {(1, 0): 1.0})
        q = poly_compose_affine(p, (2.0, 1.0), (0.5, 0.0))
        assert q == p_of(1, {(1, 0): 2.0, (0, 0): 0.5})

    def test_identity(self):
        p = p_of(1, {(0, 2): 1.0})
        assert poly_compose_affine(p, (1.0, 1.0), (0.0, 0.0)) == p

    def test_binomial_expansion(self):
        # x^2 under x -> h x + c gives h^2 x^2 + 2 h c x + c^2
        h, c = 0.25, 1.5
        p = p_of(1, {(2, 0): 1.0})
        q = poly_compose_affine(p, (h, 1.0), (c, 0.0))
        assert q.allclose(p_of(1, {(2, 0): h * h, (1, 0): 2 * h * c, (0, 0): c * c}), rel=1e-15)

    def test_matches_pointwise_evaluation(self):
        rng = np.random.default_rng(11)
        exps = monomial_exponents(3, 4)
        p = from_coeff_vector(2, exps, rng.standard_normal(len(exps)))
        scale = (0.5, 2.0, 0.125)
        shift = (0.3, -1.0, 0.7)
        q = poly_compose_affine(p, scale, shift)
        pts = rng.uniform(-1, 1, size=(15, 3))
        mapped = pts * np.array(scale) + np.array(shift)
        assert np.allclose(q.eval_many(pts), p.eval_many(mapped), rtol=1e-12, atol=1e-12)

    def test_zero_scale_rejected(self):
        with pytest.raises(ValueError):
            poly_compose_affine(p_of(1, {(1, 0): 1.0}), (0.0, 1.0), (0.0, 0.0))

    def test_wave_operator_scaling_identity(self):
        # L_a(P(s.y + c)) = s_t^2 * (L_{a s_x^2/s_t^2} P)(s.y + c)
        rng = np.random.default_rng(5)
        exps = monomial_exponents(2, 5)
        p = from_coeff_vector(1, exps, rng.standard_normal(len(exps)))
        a = 1.8
        s = (0.4, 2.5)
        c = (0.1, -0.2)
        lhs = wave_operator(poly_compose_affine(p, s, c), a)
        a_adj = a * s[0] ** 2 / s[1] ** 2
        rhs = s[1] ** 2 * poly_compose_affine(wave_operator(p, a_adj), s, c)
        assert lhs.allclose(rhs, rel=1e-13)


class TestFiniteDifferenceConsistency:
    def test_derivative_matches_central_difference(self):
        rng = np.random.default_rng(6)
        exps = monomial_exponents(2, 4)
        p = from_coeff_vector(1, exps, rng.standard_normal(len(exps)))
        eps = 1e-6
        for var in (0, 1):
            dp = poly_diff(p, var)
            for _ in range(5):
                pt = rng.uniform(-1, 1, size=2)
                hi = pt.copy()
                lo = pt.copy()
                hi[var] += eps
                lo[var] -= eps
                fd = (p.eval(hi) - p.eval(lo)) / (2 * eps)
                exact = dp.eval(pt)
                scale = max(1.0, abs(exact))
                assert abs(fd - exact) <= 1e-4 * scale  # O(eps^(2/3)) envelope


class TestMonomialMachinery:
    def test_graded_lex_order_1d(self):
        exps = monomial_exponents(2, 2)
        expected = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
        assert [tuple(r) for r in exps] == expected

    def test_counts(self):
        from math import comb

        for nvars in (2, 3, 4):
            for deg in range(6):
                assert len(monomial_exponents(nvars, deg)) == comb(deg + nvars, nvars)

    def test_diff_matrix_matches_poly_diff(self):
        rng = np.random.default_rng(8)
        exps = monomial_exponents(3, 4)
        d_mats = [diff_matrix(exps, v) for v in range(3)]
        p = from_coeff_vector(2, exps, rng.standard_normal(len(exps)))
        vec = coeff_vector(p, exps)
        for var in range(3):
            expected = coeff_vector(poly_diff(p, var), exps)
            assert np.allclose(d_mats[var] @ vec, expected, atol=1e-14)

    def test_vandermonde_matches_eval(self):
        rng = np.random.default_rng(9)
        exps = monomial_exponents(2, 3)
        vec = rng.standard_normal(len(exps))
        p = from_coeff_vector(1, exps, vec)
        pts = rng.uniform(-2, 2, size=(12, 2))
        assert np.allclose(vandermonde(exps, pts) @ vec, p.eval_many(pts), rtol=1e-13, atol=1e-13)


class TestDump:
    def test_deterministic_ordering(self):
        p = p_of(2, {(2, 0, 0): 1.0, (0, 0, 1): -3.0, (1, 1, 0): 2.0})
        assert p.dump() == "-3 * t + 2 * x * y + 1 * x^2"
        assert Polynomial.zero(1).dump() == "0"
