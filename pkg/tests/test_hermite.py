import itertools
from fractions import Fraction
from math import comb, factorial

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngca_sos import hermite


def poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def gaussian_moment(t):
    return 0 if t % 2 else factorial(t) // (2 ** (t // 2) * factorial(t // 2))


def test_monomial_coeffs_low_degrees():
    assert hermite.monomial_coeffs(0) == [1]
    assert hermite.monomial_coeffs(2) == [-1, 0, 1]
    assert hermite.monomial_coeffs(3) == [0, -3, 0, 1]


def test_closed_form_matches_recurrence():
    for t in range(16):
        assert hermite.closed_form_coeffs(t) == hermite.monomial_coeffs(t)


@pytest.mark.parametrize("t,x,want", [(2, 1, 0), (4, 0, 3), (3, 2, 2)])
def test_eval_examples(t, x, want):
    assert hermite.eval_hermite(t, x) == want


def test_eval_agrees_with_monomials():
    for t in range(21):
        coeffs = [float(c) for c in hermite.monomial_coeffs(t)]
        for x in [-5.0, -2.3, -0.7, 0.0, 0.4, 1.9, 3.3, 5.0]:
            direct = sum(c * x**p for p, c in enumerate(coeffs))
            val = hermite.eval_hermite(t, x)
            assert abs(val - direct) <= 1e-12 * max(1.0, abs(direct), sum(abs(c * x**p) for p, c in enumerate(coeffs)) * 1e-4)


@pytest.mark.parametrize("i,j,want", [
    (1, 1, {2: 1, 0: 1}),
    (2, 2, {4: 1, 2: 4, 0: 2}),
    (3, 3, {6: 1, 4: 9, 2: 18, 0: 6}),
])
def test_product_pair_examples(i, j, want):
    assert hermite.product_pair(i, j) == want


def test_product_pair_against_monomial_oracle():
    for i, j in itertools.product(range(7), repeat=2):
        prod = poly_mul(hermite.monomial_coeffs(i), hermite.monomial_coeffs(j))
        assert hermite.from_monomial(prod) == hermite.product_pair(i, j)
        assert all(isinstance(c, int) or c.denominator == 1 for c in hermite.product_pair(i, j).values())
        assert all(c > 0 for c in hermite.product_pair(i, j).values())


@pytest.mark.parametrize("labels,want", [
    ([1, 2, 3], {6: 1, 4: 11, 2: 24, 0: 6}),
    ([1, 1], {2: 1, 0: 1}),
    ([5], {5: 1}),
])
def test_linearize_examples(labels, want):
    assert hermite.linearize_product(labels) == want


def test_orthonormality_from_gaussian_moments():
    for i, j in itertools.product(range(13), repeat=2):
        prod = poly_mul(hermite.monomial_coeffs(i), hermite.monomial_coeffs(j))
        integral = sum(c * gaussian_moment(p) for p, c in enumerate(prod))
        assert integral == (factorial(i) if i == j else 0)
        assert hermite.product_pair(i, j).get(0, 0) == integral


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=4))
def test_linearize_bound_order_and_pairs(labels):
    series = hermite.linearize_product(labels)
    bound = hermite.expansion_bound(labels)
    assert all(abs(c) <= bound for c in series.values())
    for perm in set(itertools.permutations(labels)):
        assert hermite.linearize_product(list(perm)) == series
    if len(labels) == 2:
        assert series == hermite.product_pair(*labels)


def test_series_roundtrip_monomial():
    series = hermite.linearize_product([2, 3, 1])
    assert hermite.from_monomial(hermite.to_monomial(series)) == series


def test_hermite_table_matches_scalar_eval():
    import numpy as np
    xs = np.linspace(-3, 3, 7)
    table = hermite.hermite_table(6, xs)
    for t in range(7):
        for x, v in zip(xs, table[t]):
            assert v == pytest.approx(hermite.eval_hermite(t, x), abs=1e-10)


def test_product_pair_binomial_formula():
    for i, j in itertools.product(range(6), repeat=2):
        want = {i + j - 2 * u: comb(i, u) * comb(j, u) * factorial(u) for u in range(min(i, j) + 1)}
        assert hermite.product_pair(i, j) == want
