"""The simple spider algebra and disjoint unions of simple spiders.

A basis spider S(i, j; u) has i left legs, j right legs and u trivial squares
shared by both sides; it is stored as the key (i, j, u).  Disjoint unions are
keyed by (sorted tuple of (i, j) components, trivial count).
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

Key = tuple[int, int, int]
SSDKey = tuple[tuple[tuple[int, int], ...], int]


class SpiderError(ValueError):
    pass


def _clean(coeffs: dict) -> dict:
    return {k: Fraction(v) for k, v in coeffs.items() if v != 0}


class SpiderElement:
    """Finite rational combination of basis spiders S(i, j; u) with i+u, j+u <= D."""

    __slots__ = ("D", "coeffs")

    def __init__(self, D: int, coeffs: dict | None = None):
        self.D = D
        self.coeffs = _clean(coeffs or {})
        for i, j, u in self.coeffs:
            if min(i, j, u) < 0 or i + u > D or j + u > D:
                raise SpiderError(f"S({i},{j};{u}) outside the degree-{D} index bound")

    @classmethod
    def basis(cls, D: int, i: int, j: int, u: int, c=1) -> SpiderElement:
        return cls(D, {(i, j, u): c})

    @classmethod
    def unit(cls, D: int) -> SpiderElement:
        return cls(D, {(0, 0, u): 1 for u in range(D + 1)})

    @classmethod
    def zero(cls, D: int) -> SpiderElement:
        return cls(D)

    def __getitem__(self, key: Key) -> Fraction:
        return self.coeffs.get(tuple(key), Fraction(0))

    def __eq__(self, other) -> bool:
        return isinstance(other, SpiderElement) and self.D == other.D and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.D, frozenset(self.coeffs.items())))

    def _check(self, other: SpiderElement):
        if not isinstance(other, SpiderElement):
            return NotImplemented
        if other.D != self.D:
            raise SpiderError(f"degree mismatch: {self.D} vs {other.D}")
        return None

    def __add__(self, other):
        self._check(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return SpiderElement(self.D, out)

    def __neg__(self):
        return SpiderElement(self.D, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, scalar):
        return SpiderElement(self.D, {k: Fraction(scalar) * v for k, v in self.coeffs.items()})

    def __matmul__(self, other):
        return star(self, other)

    def __repr__(self):
        return f"SpiderElement(D={self.D}, {format_spider(self)!r})"

    def __str__(self):
        return format_spider(self)


@lru_cache(maxsize=None)
def _basis_star(a: Key, b: Key) -> tuple[tuple[Key, Fraction], ...]:
    i1, j1, u = a
    i2, j2, v = b
    k1, k2, k3 = i1 + u, j1 + u, j2 + v
    if i2 + v != k2:
        return ()
    out = []
    for r in range(max(0, u + v - k2), min(u, v) + 1):
        c = Fraction(comb(k1 - r, k1 - u) * comb(k3 - r, k3 - v), factorial(k2 + r - u - v))
        out.append(((k1 - r, k3 - r, r), c))
    return tuple(out)


def star(a: SpiderElement, b: SpiderElement) -> SpiderElement:
    """Bilinear star product; basis products with mismatched middle sizes vanish."""
    if a.D != b.D:
        raise SpiderError(f"degree mismatch: {a.D} vs {b.D}")
    out: dict[Key, Fraction] = {}
    for ka, ca in a.coeffs.items():
        for kb, cb in b.coeffs.items():
            for key, c in _basis_star(ka, kb):
                out[key] = out.get(key, 0) + ca * cb * c
    return SpiderElement(a.D, out)


def transpose(a: SpiderElement) -> SpiderElement:
    return SpiderElement(a.D, {(j, i, u): c for (i, j, u), c in a.coeffs.items()})


def is_left(a: SpiderElement) -> bool:
    return all(i >= j for i, j, _ in a.coeffs)


def is_right(a: SpiderElement) -> bool:
    return all(i <= j for i, j, _ in a.coeffs)


def is_consistent(a: SpiderElement) -> bool:
    """Coefficients depend only on the leg counts, and S(0,0;0) has coefficient 1."""
    if a[(0, 0, 0)] != 1:
        return False
    D = a.D
    for i in range(D + 1):
        for j in range(D + 1):
            vals = {a[(i, j, u)] for u in range(D + 1 - max(i, j))}
            if len(vals) > 1:
                return False
    return True


def is_good(a: SpiderElement, k: int) -> bool:
    """Every non-trivial spider has at least ceil(k/2) legs on each side."""
    half = -(-k // 2)
    return all((i == 0 and j == 0) or (i >= half and j >= half) for i, j, _ in a.coeffs)


def linf(a: SpiderElement) -> Fraction:
    return max((abs(c) for c in a.coeffs.values()), default=Fraction(0))


def predicates(a: SpiderElement, k: int | None = None) -> dict:
    flags = {
        "is_left": is_left(a),
        "is_right": is_right(a),
        "is_consistent": is_consistent(a),
        "linf": linf(a),
    }
    if k is not None:
        flags["is_good"] = is_good(a, k)
    return flags


def star_inverse(a: SpiderElement) -> SpiderElement:
    """Two-sided star inverse, computed blockwise through the matrix representation."""
    from .rho import inverse

    return inverse(a)


def consistent_from_legs(D: int, legs: dict) -> SpiderElement:
    """Consistent element: unit plus c(i, j) on every S(i, j; u) that fits in degree D."""
    coeffs = {(0, 0, u): 1 for u in range(D + 1)}
    for (i, j), c in legs.items():
        if i == j == 0:
            continue
        for u in range(D + 1 - max(i, j)):
            coeffs[(i, j, u)] = c
    return SpiderElement(D, coeffs)


# grammar for the literal "c1*S(i,j;u) + c2*S(i,j;u) - ..."
_TERM = re.compile(r"\s*([+-])?\s*(?:([0-9]+(?:/[0-9]+)?)\s*\*?\s*)?S\(\s*(\d+)\s*,\s*(\d+)\s*;\s*(\d+)\s*\)\s*")


def parse_spider(text: str, D: int) -> SpiderElement:
    """Parse a literal such as '1/2*S(2,2;0) - 3*S(1,1;0)'."""
    text = text.strip()
    if text == "0":
        return SpiderElement(D)
    pos, out = 0, {}
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise SpiderError(f"cannot parse spider term at {text[pos:]!r}")
        if pos > 0 and not m.group(1):
            raise SpiderError(f"missing '+' or '-' before {text[pos:m.end()].strip()!r}")
        sign = -1 if m.group(1) == "-" else 1
        c = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        key = tuple(int(m.group(g)) for g in (3, 4, 5))
        out[key] = out.get(key, 0) + sign * c
        pos = m.end()
    return SpiderElement(D, out)


def format_spider(a: SpiderElement) -> str:
    if not a.coeffs:
        return "0"
    parts = []
    for n, (key, c) in enumerate(sorted(a.coeffs.items())):
        term = f"{abs(c)}*S({key[0]},{key[1]};{key[2]})"
        if n == 0:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(("+ " if c > 0 else "- ") + term)
    return " ".join(parts)


# ---------------------------------------------------------------------------
# disjoint unions of simple spiders


def ssd_key(components, trivial: int) -> SSDKey:
    comps = tuple(sorted((int(i), int(j)) for i, j in components if i + j > 0))
    return comps, int(trivial)


def key_sizes(key: SSDKey) -> tuple[int, int]:
    comps, u = key
    return sum(i for i, _ in comps) + u, sum(j for _, j in comps) + u


class SSDElement:
    """Rational combination of disjoint unions of simple spiders of degree <= D."""

    __slots__ = ("D", "coeffs")

    def __init__(self, D: int, coeffs: dict | None = None):
        self.D = D
        out: dict[SSDKey, Fraction] = {}
        for (comps, u), c in (coeffs or {}).items():
            key = ssd_key(comps, u)
            out[key] = out.get(key, 0) + Fraction(c)
        self.coeffs = {k: c for k, c in out.items() if c != 0}
        for key in self.coeffs:
            left, right = key_sizes(key)
            if key[1] < 0 or left > D or right > D:
                raise SpiderError(f"SSD key {key} outside the degree-{D} index bound")

    @classmethod
    def from_spider(cls, a: SpiderElement) -> SSDElement:
        """Embed simple spiders as single-component disjoint unions."""
        return cls(a.D, {(((i, j),), u): c for (i, j, u), c in a.coeffs.items()})

    def simple_part(self) -> SpiderElement:
        out = {}
        for (comps, u), c in self.coeffs.items():
            if len(comps) == 0:
                out[(0, 0, u)] = c
            elif len(comps) == 1:
                out[(comps[0][0], comps[0][1], u)] = c
        return SpiderElement(self.D, out)

    def __getitem__(self, key) -> Fraction:
        return self.coeffs.get(ssd_key(*key), Fraction(0))

    def __eq__(self, other) -> bool:
        return isinstance(other, SSDElement) and self.D == other.D and self.coeffs == other.coeffs

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return SSDElement(self.D, out)

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, scalar):
        return SSDElement(self.D, {k: Fraction(scalar) * v for k, v in self.coeffs.items()})

    def __repr__(self):
        return f"SSDElement(D={self.D}, {len(self.coeffs)} keys)"


def ssd_transpose(x: SSDElement) -> SSDElement:
    return SSDElement(x.D, {(tuple((j, i) for i, j in comps), u): c for (comps, u), c in x.coeffs.items()})


def _multisets(items: list[tuple[tuple[int, int], Fraction]], left: int, right: int, start: int = 0):
    """Multisets of (legs, coefficient) items whose left/right totals stay within budget."""
    yield (), Fraction(1)
    for idx in range(start, len(items)):
        (i, j), c = items[idx]
        if i <= left and j <= right:
            for rest, cr in _multisets(items, left - i, right - j, idx):
                yield ((i, j),) + rest, c * cr


def dcomb(a: SpiderElement) -> SSDElement:
    """D-combination: every disjoint union within the index bound, coefficients multiplied."""
    if not is_consistent(a):
        raise SpiderError("D-combination needs a consistent element")
    D = a.D
    legs = sorted({(i, j): c for (i, j, u), c in a.coeffs.items() if i + j > 0}.items())
    out = {}
    for comps, c in _multisets(legs, D, D):
        left = sum(i for i, _ in comps)
        right = sum(j for _, j in comps)
        for u in range(D - max(left, right) + 1):
            out[(comps, u)] = c
    return SSDElement(D, out)


@lru_cache(maxsize=None)
def _key_product(x: SSDKey, y: SSDKey) -> tuple[tuple[SSDKey, Fraction], ...]:
    """Well-behaved product of two disjoint-union basis elements."""
    xs, ux = x
    ys, uy = y
    if sum(b for _, b in xs) + ux != sum(c for c, _ in ys) + uy:
        return ()
    sum_c = sum(c for c, _ in ys)
    denom = 1
    for m in Counter(xs).values():
        denom *= factorial(m)
    for m in Counter(ys).values():
        denom *= factorial(m)
    totals: dict[SSDKey, Fraction] = {}

    def assign(pos: int, used: frozenset, merged: list, legs_shared: int, weight: Fraction):
        if pos == len(xs):
            trivial = ux - sum_c + legs_shared
            if trivial < 0:
                return
            comps = [xs[p] for p in range(len(xs)) if p not in {m[0] for m in merged}]
            comps += [ys[q] for q in range(len(ys)) if q not in used]
            comps += [m[1] for m in merged]
            counts = Counter(comps)
            num = 1
            for m in counts.values():
                num *= factorial(m)
            key = ssd_key(comps, trivial)
            totals[key] = totals.get(key, 0) + weight * num / denom
            return
        assign(pos + 1, used, merged, legs_shared, weight)
        a, b = xs[pos]
        for q, (c, d) in enumerate(ys):
            if q in used:
                continue
            for shared in range(min(b, c) + 1):
                p_legs, q_legs = a + c - shared, b + d - shared
                w = Fraction(comb(p_legs, a) * comb(q_legs, d), factorial(shared))
                assign(pos + 1, used | {q}, merged + [(pos, (p_legs, q_legs))], legs_shared + shared, weight * w)

    assign(0, frozenset(), [], 0, Fraction(1))
    return tuple((k, v) for k, v in totals.items() if v != 0)


def wbp(x: SSDElement, y: SSDElement, k: int | None = None) -> SSDElement:
    """Well-behaved product of disjoint-union combinations.

    Merged circles whose legs all vanish become isolated and are dropped.
    When k is given, inputs must be good for that k.
    """
    if x.D != y.D:
        raise SpiderError(f"degree mismatch: {x.D} vs {y.D}")
    if k is not None:
        half = -(-k // 2)
        for elem in (x, y):
            for comps, _ in elem.coeffs:
                if any(i < half or j < half for i, j in comps):
                    raise SpiderError(f"well-behaved product needs good inputs for k={k}; got components {comps}")
    out: dict[SSDKey, Fraction] = {}
    for kx, cx in x.coeffs.items():
        for ky, cy in y.coeffs.items():
            for key, c in _key_product(kx, ky):
                out[key] = out.get(key, 0) + cx * cy * c
    return SSDElement(x.D, out)


def ssd_unit(D: int) -> SSDElement:
    return SSDElement(D, {((), u): 1 for u in range(D + 1)})


def random_element(rng, D: int, density: float = 0.5, scale: int = 5, keys=None) -> SpiderElement:
    """Random element with small integer coefficients (for property tests)."""
    keys = keys or [(i, j, u) for u in range(D + 1) for i in range(D + 1 - u) for j in range(D + 1 - u)]
    coeffs = {}
    for key in keys:
        if rng.random() < density:
            coeffs[key] = Fraction(int(rng.integers(-scale, scale + 1)), int(rng.integers(1, 4)))
    return SpiderElement(D, coeffs)


def all_keys(D: int) -> list[Key]:
    return [(i, j, u) for u in range(D + 1) for i in range(D + 1 - u) for j in range(D + 1 - u)]


def ssd_keys_within(D: int, max_left: int, max_right: int):
    """All disjoint-union keys with left size <= max_left and right size <= max_right."""
    pairs = [(i, j) for i in range(max_left + 1) for j in range(max_right + 1) if i + j > 0]
    out = []
    for r in range(0, max_left + max_right + 1):
        for comps in itertools.combinations_with_replacement(pairs, r):
            left = sum(i for i, _ in comps)
            right = sum(j for _, j in comps)
            if left > max_left or right > max_right:
                continue
            for u in range(min(max_left - left, max_right - right) + 1):
                out.append((comps, u))
    return out
