"""Exact arithmetic in the probabilists' Hermite basis.

Series are plain ``dict[int, Fraction]`` keyed by degree with no stored zeros.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

HermiteSeries = dict


@lru_cache(maxsize=None)
def _monomial_coeffs(t: int) -> tuple[Fraction, ...]:
    if t == 0:
        return (Fraction(1),)
    if t == 1:
        return (Fraction(0), Fraction(1))
    prev, cur = _monomial_coeffs(t - 2), _monomial_coeffs(t - 1)
    out = [Fraction(0)] * (t + 1)
    for i, c in enumerate(cur):
        out[i + 1] += c
    for i, c in enumerate(prev):
        out[i] -= (t - 1) * c
    return tuple(out)


def monomial_coeffs(t: int) -> list[Fraction]:
    """Ascending monomial coefficients of He_t (leading coefficient 1)."""
    if t < 0:
        raise ValueError(f"degree must be non-negative, got {t}")
    return list(_monomial_coeffs(t))


def closed_form_coeffs(t: int) -> list[Fraction]:
    """He_t from the explicit sum over j <= t/2 of (-1)^j t!/(j!(t-2j)! 2^j) x^(t-2j)."""
    out = [Fraction(0)] * (t + 1)
    for j in range(t // 2 + 1):
        out[t - 2 * j] = Fraction((-1) ** j * factorial(t), factorial(j) * factorial(t - 2 * j) * 2**j)
    return out


def eval_hermite(t: int, x: float) -> float:
    """He_t(x) by the three-term recurrence."""
    if t < 0:
        raise ValueError(f"degree must be non-negative, got {t}")
    prev, cur = 1.0, float(x)
    if t == 0:
        return prev
    for s in range(1, t):
        prev, cur = cur, x * cur - s * prev
    return cur


def hermite_table(t_max: int, x) -> np.ndarray:
    """Array of shape (t_max + 1, *x.shape) with He_0..He_{t_max} evaluated at x."""
    x = np.asarray(x, dtype=float)
    out = np.empty((t_max + 1,) + x.shape)
    out[0] = 1.0
    if t_max >= 1:
        out[1] = x
    for s in range(1, t_max):
        out[s + 1] = x * out[s] - s * out[s - 1]
    return out


def product_pair(i: int, j: int) -> HermiteSeries:
    """h_i * h_j = sum_u C(i,u) C(j,u) u! h_{i+j-2u}."""
    if i < 0 or j < 0:
        raise ValueError("degrees must be non-negative")
    return {i + j - 2 * u: Fraction(comb(i, u) * comb(j, u) * factorial(u)) for u in range(min(i, j) + 1)}


def multiply(a: HermiteSeries, b: HermiteSeries) -> HermiteSeries:
    out: dict[int, Fraction] = {}
    for da, ca in a.items():
        for db, cb in b.items():
            for deg, c in product_pair(da, db).items():
                out[deg] = out.get(deg, Fraction(0)) + ca * cb * c
    return {d: c for d, c in out.items() if c != 0}


def linearize_product(labels) -> HermiteSeries:
    """Hermite expansion of the product of h_l over the given labels (folded left to right)."""
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be non-empty")
    if any(l < 0 for l in labels):
        raise ValueError(f"labels must be non-negative: {labels}")
    acc: HermiteSeries = {labels[0]: Fraction(1)}
    for l in labels[1:]:
        acc = multiply(acc, {l: Fraction(1)})
    return dict(sorted(acc.items(), reverse=True))


def expansion_bound(labels) -> int:
    """Magnitude bound (2l)^(l - l_max) on linearization coefficients, l the total label."""
    total = sum(labels)
    return (2 * total) ** (total - max(labels))


def to_monomial(series: HermiteSeries) -> list[Fraction]:
    deg = max(series, default=0)
    out = [Fraction(0)] * (deg + 1)
    for d, c in series.items():
        for i, m in enumerate(_monomial_coeffs(d)):
            out[i] += c * m
    return out


def from_monomial(coeffs) -> HermiteSeries:
    """Re-expand a monomial-basis polynomial in the Hermite basis (triangular solve)."""
    rest = [Fraction(c) for c in coeffs]
    out: dict[int, Fraction] = {}
    for d in range(len(rest) - 1, -1, -1):
        c = rest[d]
        if c == 0:
            continue
        out[d] = c
        for i, m in enumerate(_monomial_coeffs(d)):
            rest[i] -= c * m
    return out
