import math
from fractions import Fraction

import numpy as np
import pytest

from ngca_sos import dist, qfactor, rho, spider
from ngca_sos.spider import SpiderElement, star, transpose

S = SpiderElement.basis

EXACT_PROFILES = {
    "gaussian": dist.make_profile("gaussian", 12),
    "rademacher": dist.make_profile("rademacher", 12),
    "a_mix": dist.make_profile("a_mix", 12, delta=Fraction(3, 10)),
    "a_cov": dist.make_profile("a_cov", 12, tau=Fraction(1, 10)),
}
FLOAT_PROFILES = {
    "a_gmm3": dist.make_profile("a_gmm", 12, k=3, delta=0.5),
    "a_gmm2": dist.make_profile("a_gmm", 12, k=2, delta=0.3),
}


class TestBuildParts:
    def test_matching_profile_degree_two(self):
        p = EXACT_PROFILES["a_mix"]
        L, Q0, Qhat = qfactor.build_parts(p, 2)
        assert L == SpiderElement.unit(2)
        assert Qhat == SpiderElement.unit(2) + S(2, 2, 2, 0, p(4))

    def test_rademacher_degree_three(self):
        p = EXACT_PROFILES["rademacher"]
        L, _, _ = qfactor.build_parts(p, 3)
        assert L == SpiderElement.unit(3) + S(3, 3, 1, 0, p(4))

    @pytest.mark.parametrize("name", EXACT_PROFILES)
    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_sum_identity(self, name, D):
        L, Q0, Qhat = qfactor.build_parts(EXACT_PROFILES[name], D)
        assert L + Q0 + transpose(L) - 2 * SpiderElement.unit(D) == Qhat
        for (i, j, u), c in Qhat.coeffs.items():
            assert c == EXACT_PROFILES[name](i + j)

    def test_degree_too_high(self):
        with pytest.raises(qfactor.FeasibilityError):
            qfactor.build_parts(dist.make_profile("gaussian", 4), 3)


class TestSolve:
    def test_degree_four(self):
        for name in ("a_mix", "a_cov", "rademacher"):
            p = EXACT_PROFILES[name]
            fact = qfactor.solve_qss(p, 2)
            assert fact.Q_SS == SpiderElement.unit(2) + S(2, 2, 2, 0, p(4))

    def test_degree_six_even_profile(self):
        p = EXACT_PROFILES["a_mix"]
        Q = qfactor.solve_qss(p, 3).Q_SS
        l4, l6 = p(4), p(6)
        assert Q[(2, 2, 0)] == l4 and Q[(2, 2, 1)] == l4
        assert Q[(3, 3, 0)] == l6 - l4 * l4
        assert Q == SpiderElement.unit(3) + S(3, 2, 2, 0, l4) + S(3, 2, 2, 1, l4) + S(3, 3, 3, 0, l6 - l4 * l4)

    def test_rademacher_boundary(self):
        fact = qfactor.solve_qss(EXACT_PROFILES["rademacher"], 2)
        assert fact.Q_SS == SpiderElement.unit(2) - S(2, 2, 2, 0, 2)
        assert fact.min_eig_rho0 == pytest.approx(0, abs=1e-12)
        assert fact.certified_bound is None

    @pytest.mark.parametrize("name", EXACT_PROFILES)
    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_exact_factorization(self, name, D):
        fact = qfactor.solve_qss(EXACT_PROFILES[name], D)
        assert star(star(fact.L_SS, fact.Q_SS), transpose(fact.L_SS)) == fact.Qhat
        assert spider.is_consistent(fact.Q_SS)

    @pytest.mark.parametrize("name", FLOAT_PROFILES)
    def test_float_factorization(self, name):
        fact = qfactor.solve_qss(FLOAT_PROFILES[name], 4)
        back = star(star(fact.L_SS, fact.Q_SS), transpose(fact.L_SS))
        assert qfactor.spider_residual(back, fact.Qhat) <= 1e-9

    @pytest.mark.parametrize("name,k", [("a_mix", 4), ("a_cov", 4), ("a_gmm3", 6)])
    def test_goodness(self, name, k):
        p = {**EXACT_PROFILES, **FLOAT_PROFILES}[name]
        assert p.k_match == k
        for D in (2, 3, 4):
            assert spider.is_good(qfactor.solve_qss(p, D).Q_SS, k)

    @pytest.mark.parametrize("name", ["gaussian", "a_mix", "a_cov"])
    @pytest.mark.parametrize("D", [2, 3])
    def test_certified_lower_bound(self, name, D):
        fact = qfactor.solve_qss(EXACT_PROFILES[name], D, dtrunc=4)
        assert fact.certified_bound is not None
        assert min(fact.component_min_eigs) >= fact.certified_bound - 1e-9
        cu, cl = dist.cucl(EXACT_PROFILES[name], D, 4)
        assert fact.certified_bound == pytest.approx((6 * cu) ** (-2 * D) * cl ** (-D))


class TestRhoZero:
    @pytest.mark.parametrize("name", list(EXACT_PROFILES) + list(FLOAT_PROFILES))
    @pytest.mark.parametrize("D", [1, 2, 3, 4])
    def test_gram_and_least_eigenvalue(self, name, D):
        p = {**EXACT_PROFILES, **FLOAT_PROFILES}[name]
        np.testing.assert_allclose(qfactor.rho0_qhat(p, D), dist.gram_matrix(p, D), atol=1e-12)
        sig, la = qfactor.sigma_min_check(p, D)
        assert sig == pytest.approx(la, abs=1e-10)

    def test_expectation_of_squares(self):
        p = EXACT_PROFILES["a_mix"]
        D = 3
        x = dist.sample(p, 100_000, 5)
        v = np.stack([np.array([np.polynomial.hermite_e.hermeval(x, [0] * t + [1]) for t in range(D + 1)]) [t]
                      / math.sqrt(math.factorial(t)) for t in range(D + 1)])
        outer = v[:, None, :] * v[None, :, :]
        mean, se = outer.mean(axis=2), outer.std(axis=2) / math.sqrt(x.size)
        target = qfactor.rho0_qhat(p, D)
        assert np.all(np.abs(mean - target) <= 5 * se + 1e-12)


class TestSqrt:
    def test_degree_four_root(self):
        for name in ("a_mix", "a_cov"):
            p = EXACT_PROFILES[name]
            fact = qfactor.sqrt_alpha0(qfactor.solve_qss(p, 2), 4)
            x = qfactor.degree4_root(p(4))
            assert 2 * x + x * x / 2 == pytest.approx(float(p(4)))
            assert float(fact.alpha0[(2, 2, 0)]) == pytest.approx(x, abs=1e-9)
            assert qfactor.spider_residual(star(fact.alpha0, transpose(fact.alpha0)), fact.Q_SS) <= 1e-9

    def test_rademacher_boundary(self):
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(EXACT_PROFILES["rademacher"], 2), 4)
        assert fact.alpha0 == SpiderElement.unit(2) - S(2, 2, 2, 0, 2)
        assert fact.alpha0_exact
        assert fact.alpha0_inv is None

    def test_gaussian(self):
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(EXACT_PROFILES["gaussian"], 3))
        assert fact.alpha0 == SpiderElement.unit(3)
        assert fact.alpha0_inv == SpiderElement.unit(3)

    @pytest.mark.parametrize("name,k", [("a_mix", 4), ("a_cov", 4), ("a_gmm3", 6)])
    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_left_good_consistent(self, name, k, D):
        p = {**EXACT_PROFILES, **FLOAT_PROFILES}[name]
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(p, D), k)
        assert qfactor.left_good_consistent(fact.alpha0, k)
        assert qfactor.spider_residual(star(fact.alpha0, transpose(fact.alpha0)), fact.Q_SS) <= 1e-9
        if fact.alpha0_inv is not None:
            assert qfactor.spider_residual(star(fact.alpha0, fact.alpha0_inv), SpiderElement.unit(D)) <= 1e-9

    def test_not_psd(self):
        bad = dist.make_profile("custom", 8, l=[1, 0, 0, 0, -3, 0, 0, 0, 0])
        with pytest.raises(qfactor.FeasibilityError, match="not PSD"):
            qfactor.sqrt_alpha0(qfactor.solve_qss(bad, 2, dtrunc=2))


class TestBounds:
    def test_gaussian_trivial(self):
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(EXACT_PROFILES["gaussian"], 3))
        assert all(row["ok"] for row in qfactor.bounds_check(fact))

    def test_a_mix_degree_three(self):
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(EXACT_PROFILES["a_mix"], 3), 4)
        rows = qfactor.bounds_check(fact)
        assert rows and all(row["ok"] for row in rows)
        assert any(row["element"] == "alpha0_inv" for row in rows)

    def test_degree_four_root_bound(self):
        p = dist.make_profile("a_cov", 12, tau=0.05)
        cu, _ = dist.cucl(p, 2, 4)
        assert abs(qfactor.degree4_root(p(4))) <= 2**12 * cu**10


class TestQSSD:
    def test_gaussian_identity(self):
        fact = qfactor.solve_qss(EXACT_PROFILES["gaussian"], 3)
        assert qfactor.build_qssd(fact) == spider.ssd_unit(3)

    def test_rademacher_product_key(self):
        fact = qfactor.solve_qss(EXACT_PROFILES["rademacher"], 4)
        assert qfactor.build_qssd(fact)[(((2, 2), (2, 2)), 0)] == 4

    def test_square_identity_exact_boundary(self):
        fact = qfactor.sqrt_alpha0(qfactor.solve_qss(EXACT_PROFILES["rademacher"], 4), 4)
        assert fact.alpha0_exact
        assert qfactor.qssd_square_check(fact) is True

    def test_inconsistent_rejected(self):
        fact = qfactor.solve_qss(EXACT_PROFILES["gaussian"], 2)
        fact.Q_SS = S(2, 2, 1, 0)
        with pytest.raises(spider.SpiderError):
            qfactor.build_qssd(fact)


class TestFeasibility:
    def test_rademacher_boundary(self):
        rep = qfactor.feasibility(EXACT_PROFILES["rademacher"])
        assert rep["l4"] == -2 and rep["l6"] == 16
        assert rep["l4_condition"] and rep["l6_condition"]
        assert rep["l4_margin"] == 0 and rep["l6_margin"] == 0

    def test_gaussian(self):
        rep = qfactor.feasibility(EXACT_PROFILES["gaussian"])
        assert rep["l4_margin"] == 2 and rep["l6_margin"] == 6

    def test_gmm(self):
        rep = qfactor.feasibility(dist.make_profile("a_gmm", 8, k=3, delta=0.1))
        assert rep["l4_condition"] and rep["l6_condition"]
