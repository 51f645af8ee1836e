import itertools
from fractions import Fraction
from math import factorial, sqrt

import numpy as np
import pytest

from ngca_sos import rho, spider
from ngca_sos.spider import SpiderElement, star

S = SpiderElement.basis


class TestRho:
    @pytest.mark.parametrize("D", range(1, 6))
    def test_unit_is_identity(self, D):
        M = rho.rho(SpiderElement.unit(D))
        assert np.array_equal(M.pre, rho._eye(rho.size(D)))

    def test_single_entries(self):
        M = rho.rho(S(2, 2, 2, 0))
        nz = [(r, c) for r in range(M.pre.shape[0]) for c in range(M.pre.shape[1]) if M.pre[r, c] != 0]
        assert len(nz) == 1
        assert np.array_equal(M.block(2, 2), np.array([[0, 0, 0], [0, 0, 0], [0, 0, Fraction(1, 2)]], dtype=object))
        assert M.numeric()[nz[0]] == pytest.approx(0.5)

        M = rho.rho(S(2, 1, 0, 0))
        blk = M.block(1, 0)
        assert blk[1, 0] == 1 and blk[0, 0] == 0
        assert M.numeric()[rho.offsets(2)[1] + 1, rho.offsets(2)[0]] == pytest.approx(1)

    def test_orthonormal_entries_match_formula(self):
        D = 4
        for key in spider.all_keys(D):
            i, j, u = key
            M = rho.rho(S(D, *key)).numeric()
            off = rho.offsets(D)
            k1, k2 = i + u, j + u
            for r in range(k1 + 1):
                c = r + k2 - k1
                if 0 <= c <= k2:
                    assert M[off[k1] + r, off[k2] + c] == pytest.approx(rho.rho_entry_formula(i, j, u, r, c))

    @pytest.mark.parametrize("D", [2, 3, 4, 5])
    def test_homomorphism(self, D):
        rng = np.random.default_rng(D)
        for _ in range(20):
            a = spider.random_element(rng, D, 0.4)
            b = spider.random_element(rng, D, 0.4)
            assert rho.rho(star(a, b)) == rho.rho(a) @ rho.rho(b)

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_transpose_for_every_basis_spider(self, D):
        for key in spider.all_keys(D):
            a = S(D, *key)
            assert rho.rho(spider.transpose(a)) == rho.rho(a).transpose_conjugated()
            np.testing.assert_allclose(rho.rho(spider.transpose(a)).numeric(), rho.rho(a).numeric().T, atol=1e-12)

    @pytest.mark.parametrize("D", [1, 2, 3, 4])
    def test_span_dimension(self, D):
        assert rho.span_dimension(D) == sum(i * i for i in range(1, D + 2))

    @pytest.mark.parametrize("D", [3, 4])
    def test_triangularity(self, D):
        rng = np.random.default_rng(30 + D)
        left_keys = [k for k in spider.all_keys(D) if k[0] >= k[1]]
        right_keys = [k for k in spider.all_keys(D) if k[0] <= k[1]]
        for _ in range(10):
            a = spider.random_element(rng, D, 0.5, keys=left_keys)
            b = spider.random_element(rng, D, 0.5, keys=right_keys)
            assert rho.rho(a).is_lower() and rho.rho(b).is_upper()
        assert not rho.rho(S(D, 1, 2, 0)).is_lower()
        assert not rho.rho(S(D, 2, 1, 0)).is_upper()


class TestInverse:
    def test_identity(self):
        assert rho.rho_inverse(rho.rho(SpiderElement.unit(3))) == SpiderElement.unit(3)

    def test_single_entry(self):
        M = rho.BlockMatrix.zero(2)
        off = rho.offsets(2)
        M.pre[off[2] + 2, off[2] + 2] = Fraction(1, 2)
        assert rho.rho_inverse(M) == S(2, 2, 2, 0)

    @pytest.mark.parametrize("D", [1, 2, 3, 4, 5])
    def test_roundtrip(self, D):
        rng = np.random.default_rng(40 + D)
        for _ in range(20):
            a = spider.random_element(rng, D, 0.5)
            assert rho.rho_inverse(rho.rho(a)) == a

    def test_support_violation(self):
        M = rho.BlockMatrix.zero(2)
        off = rho.offsets(2)
        M.pre[off[2], off[2] + 1] = Fraction(1)
        with pytest.raises(rho.NotInImage, match="not in the image of rho"):
            rho.rho_inverse(M)


class TestComponents:
    def test_identity(self):
        D = 3
        for i, comp in enumerate(rho.components(rho.rho(SpiderElement.unit(D)))):
            assert np.array_equal(comp, rho._eye(D - i + 1))

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_reconstruction_and_multiplicativity(self, D):
        rng = np.random.default_rng(50 + D)
        for _ in range(10):
            a = spider.random_element(rng, D, 0.5)
            b = spider.random_element(rng, D, 0.5)
            Ma, Mb = rho.rho(a), rho.rho(b)
            assert rho.from_components(rho.components(Ma)) == Ma
            for ca, cb, cab in zip(rho.components(Ma), rho.components(Mb), rho.components(rho.rho(star(a, b)))):
                assert np.array_equal(ca @ cb, cab)

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_lpc_iff_consistent(self, D):
        rng = np.random.default_rng(60 + D)
        for _ in range(10):
            legs = {(i, j): Fraction(int(rng.integers(-4, 5)), 2) for i in range(D + 1) for j in range(D + 1)
                    if i + j and rng.random() < 0.6}
            a = spider.consistent_from_legs(D, legs)
            assert spider.is_consistent(a) and rho.is_lpc(rho.rho(a))
            broken = [k for k in spider.all_keys(D) if k[2] > 0]
            key = broken[int(rng.integers(len(broken)))]
            b = a + S(D, *key, 1)
            assert not spider.is_consistent(b) and not rho.is_lpc(rho.rho(b))


class TestHTransform:
    def test_h0_diagonal(self):
        H, _ = rho.h_transform(0, 5)
        assert np.allclose(np.diag(H), [1 / factorial(i) for i in range(6)])

    def test_small(self):
        H, Hinv = rho.h_transform(0, 1)
        assert np.allclose(H, [[1, 0], [1, 1]])
        assert np.allclose(Hinv, [[1, 0], [-1, 1]])

    @pytest.mark.parametrize("D", range(0, 7))
    def test_inverse_closed_form(self, D):
        for t in range(D + 1):
            H, Hinv = rho.h_transform(t, D)
            n = D - t + 1
            assert np.allclose(H @ Hinv, np.eye(n))
            for i, j in itertools.product(range(n), repeat=2):
                want = 0.0 if i < j else (-1) ** (i - j) * factorial(i) * factorial(i + t) / (
                    factorial(i - j) * sqrt(factorial(j) * factorial(j + t)))
                assert Hinv[i, j] == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_power_of_two_bound_fails_beyond_degree_one(self):
        # the inverse grows like i!(i+t)!, so a 2^(i-j) envelope cannot hold
        _, Hinv = rho.h_transform(0, 1)
        assert np.all(np.abs(Hinv) <= np.array([[1, 0], [2, 1]]))
        _, Hinv = rho.h_transform(0, 2)
        assert Hinv[2, 1] == pytest.approx(-4)
        assert abs(Hinv[2, 1]) > 2 ** (2 - 1)

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_maps_leg_coefficients_to_diagonals(self, D):
        rng = np.random.default_rng(70 + D)
        legs = {(i, j): Fraction(int(rng.integers(-4, 5)), 3) for i in range(D + 1) for j in range(D + 1) if i + j}
        a = spider.consistent_from_legs(D, legs)
        rho0 = rho.component_numeric(rho.components(rho.rho(a))[0])
        for t in range(D + 1):
            H, _ = rho.h_transform(t, D)
            w = np.array([float(a[(j, j + t, 0)]) for j in range(D - t + 1)])
            v = np.array([rho0[i, i + t] for i in range(D - t + 1)])
            np.testing.assert_allclose(H @ w, v, atol=1e-10)

    def test_range(self):
        with pytest.raises(ValueError):
            rho.h_transform(3, 2)
