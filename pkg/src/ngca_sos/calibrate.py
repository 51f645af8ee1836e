"""Pseudo-calibration on data: Fourier terms, pseudo-expectations, moment
matrices, realized graph matrices and the oracles tying them together.

Subsets of [n] index moment matrices level by level (size 0, 1, ..., D) and
colexicographically within a level: (0,1) < (0,2) < (1,2) < (0,3) < ...
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import svds

from .dist import MomentProfile, ProfileError
from .hermite import hermite_table
from .shape import (
    Shape,
    ShapeError,
    automorphism_count,
    enumerate_shapes,
    hermite_coefficient,
    is_left,
    scaling_coefficient,
)

MAX_SUBSETS = 4000
EMBEDDING_BUDGET = 10**8


class CalibrationError(ValueError):
    pass


@dataclass
class Dataset:
    samples: np.ndarray  # m x n
    seed: object = None
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2:
            raise CalibrationError("samples must be an m x n matrix")
        if not np.all(np.isfinite(self.samples)):
            raise CalibrationError("samples contain non-finite entries")

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def hermite(self, t_max: int) -> np.ndarray:
        """He_t(x_{u,i}) for t = 0..t_max as a (t_max+1, m, n) array, cached."""
        have = self._tables.get("he")
        if have is None or have.shape[0] <= t_max:
            self._tables["he"] = hermite_table(t_max, self.samples)
            self._tables.pop("scaled", None)
        return self._tables["he"]

    def scaled_hermite(self, t_max: int) -> np.ndarray:
        """He_t(x_{u,i}) / t!, cached."""
        table = self.hermite(t_max)
        scaled = self._tables.get("scaled")
        if scaled is None or scaled.shape[0] != table.shape[0]:
            facts = np.array([math.factorial(t) for t in range(table.shape[0])], dtype=float)
            scaled = table / facts[:, None, None]
            self._tables["scaled"] = scaled
        return scaled


def empty_dataset(n: int) -> Dataset:
    return Dataset(np.zeros((0, n)))


# ---------------------------------------------------------------------------
# subset indexing


@lru_cache(maxsize=None)
def subsets(n: int, D: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for d in range(D + 1):
        out.extend(sorted(itertools.combinations(range(n), d), key=lambda s: s[::-1]))
    return tuple(out)


def level_offsets(n: int, D: int) -> list[int]:
    offs = [0]
    for d in range(D + 1):
        offs.append(offs[-1] + math.comb(n, d))
    return offs


def colex_rank(sorted_labels: np.ndarray) -> np.ndarray:
    """Colex rank of each column of a (d, N) array of increasing labels."""
    d = sorted_labels.shape[0]
    rank = np.zeros(sorted_labels.shape[1], dtype=np.int64)
    if d == 0:
        return rank
    top = int(sorted_labels.max()) + 1 if sorted_labels.size else 1
    for r in range(d):
        table = np.array([math.comb(x, r + 1) for x in range(top)], dtype=np.int64)
        rank += table[sorted_labels[r]]
    return rank


# ---------------------------------------------------------------------------
# term enumeration


def _multi_index(I, n: int) -> tuple[int, ...]:
    if isinstance(I, dict):
        vec = [0] * n
        for i, e in I.items():
            vec[i] += e
        return tuple(vec)
    I = tuple(I)
    if not I:
        return (0,) * n
    if len(I) != n:
        raise CalibrationError(f"multi-index has length {len(I)}, expected n={n}")
    if any(e < 0 for e in I):
        raise CalibrationError("multi-index entries must be non-negative")
    return I


def subset_multi_index(S, n: int) -> tuple[int, ...]:
    vec = [0] * n
    for i in S:
        vec[i] += 1
    return tuple(vec)


def _profile_value(profile: MomentProfile, t: int) -> float:
    try:
        return float(profile(t))
    except ProfileError:
        raise CalibrationError(f"profile only defines degrees up to {profile.T}, need {t}") from None


def _patterns(n: int, fixed: frozenset, budget: int, min_weight: int):
    """Circle patterns (sorted (square, label) tuples) with weight + new squares <= budget."""
    def grow(i, remaining, acc, weight):
        if i == n:
            if weight >= min_weight:
                yield tuple(acc)
            return
        yield from grow(i + 1, remaining, acc, weight)
        base = 0 if i in fixed else 1
        for label in range(1, remaining - base + 1):
            acc.append((i, label))
            yield from grow(i + 1, remaining - label - base, acc, weight + label)
            acc.pop()
    yield from grow(0, budget, [], 0)


def _term_classes(K, n: int, Dtrunc: int, circle_cost, weight_ok, max_circles: int | None = None):
    """Multisets of circle patterns satisfying the truncation and parity constraints."""
    supp = frozenset(i for i, e in enumerate(K) if e)
    base = len(supp)
    if base > Dtrunc:
        return
    classes = []

    def total(patterns):
        squares = set(supp)
        weight = 0
        for p in patterns:
            squares.update(i for i, _ in p)
            weight += sum(l for _, l in p)
        return weight + len(squares) + circle_cost * len(patterns)

    def parity_ok(patterns):
        col = list(K)
        for p in patterns:
            for i, l in p:
                col[i] += l
        return all(c % 2 == 0 for c in col)

    def extend(patterns):
        if parity_ok(patterns):
            classes.append(tuple(patterns))
        if max_circles is not None and len(patterns) >= max_circles:
            return
        used = set(supp)
        for p in patterns:
            used.update(i for i, _ in p)
        room = Dtrunc - total(patterns) - circle_cost
        if room < 1:
            return
        for p in _patterns(n, frozenset(used), int(room), 1):
            if patterns and p < patterns[-1]:
                continue
            if not weight_ok(sum(l for _, l in p)):
                continue
            new = patterns + [p]
            if total(new) <= Dtrunc:
                extend(new)

    extend([])
    yield from classes


def enumerate_terms(I, n: int, m: int, Dtrunc: int, k: int, profile: MomentProfile | None = None,
                    prune: bool = True, circle_cost=1):
    """Every term a with total^I(a) <= Dtrunc and even column sums, as {(u, i): label} dicts.

    Ordered by (active circles, active squares, weight) and then lexicographically.
    Pruning drops circles of weight 1..k-1; with a profile it also drops any
    circle weight where the profile's Hermite expectation vanishes.
    """
    if Dtrunc > 12:
        raise CalibrationError("term enumeration is capped at Dtrunc = 12")
    if k < 2:
        raise CalibrationError("k must be at least 2")
    K = _multi_index(I, n)

    def weight_ok(w):
        if not prune:
            return True
        if w < k:
            return False
        return profile is None or _profile_value(profile, w) != 0

    concrete = []
    for cls in _term_classes(K, n, Dtrunc, circle_cost, weight_ok, max_circles=m):
        for circles in itertools.permutations(range(m), len(cls)):
            term = {}
            for u, p in zip(circles, cls):
                for i, l in p:
                    term[(u, i)] = l
            concrete.append(term)
    unique = {tuple(sorted(t.items())): t for t in concrete}

    def order(t):
        circles = {u for u, _ in t}
        squares = {i for _, i in t}
        return (len(circles), len(squares), sum(t.values()), sorted(t.items()))

    yield from sorted(unique.values(), key=order)


# ---------------------------------------------------------------------------
# pseudo-expectation


def _set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for r in range(len(part)):
            yield part[:r] + [[first] + part[r]] + part[r + 1:]


def _mobius(part) -> int:
    out = 1
    for block in part:
        out *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
    return out


def _distinct_sum(factors: list[np.ndarray]) -> float:
    """Sum over distinct row indices u_1..u_c of prod_r factors[r][u_r]."""
    if not factors:
        return 1.0
    total = 0.0
    for part in _set_partitions(range(len(factors))):
        term = float(_mobius(part))
        for block in part:
            prod = factors[block[0]].copy()
            for r in block[1:]:
                prod = prod * factors[r]
            term *= prod.sum()
        total += term
    return total


class Calibration:
    """Evaluates pseudo-calibration values for one dataset and parameter set."""

    def __init__(self, dataset: Dataset, profile: MomentProfile, Dtrunc: int, k: int, circle_cost=1):
        if Dtrunc > 12:
            raise CalibrationError("pseudo-calibration is capped at Dtrunc = 12")
        if k < 2:
            raise CalibrationError("k must be at least 2")
        self.ds = dataset
        self.profile = profile
        self.Dtrunc = Dtrunc
        self.k = k
        self.circle_cost = Fraction(circle_cost)
        self.n = dataset.n
        top = max(Dtrunc, 1)
        self.lvals = [_profile_value(profile, t) if t <= top else 0.0 for t in range(top + 1)]
        self.g = dataset.scaled_hermite(top) if dataset.m else None
        active = [w for w in range(k, top + 1) if self.lvals[w] != 0]
        self.min_cost = (min(active) + 1 + self.circle_cost) if active else None
        # two circles can share a single square: 1 + 2 (w + circle cost)
        self.single_circle = not active or 1 + 2 * (min(active) + self.circle_cost) > Dtrunc
        self._raw: dict = {}
        self._label_sums: dict = {}

    # -- helpers --------------------------------------------------------

    def weight_ok(self, w: int) -> bool:
        return w >= self.k and w < len(self.lvals) and self.lvals[w] != 0

    def _pattern_vector(self, pattern) -> np.ndarray:
        vec = np.ones(self.ds.m)
        for i, l in pattern:
            vec = vec * self.g[l, :, i]
        return vec

    def _label_sum(self, labels: tuple) -> np.ndarray:
        """sum_j prod_{b in labels} g_b(u, j) over all squares j, cached per label multiset."""
        got = self._label_sums.get(labels)
        if got is None:
            prod = np.ones((self.ds.m, self.n))
            for b in labels:
                prod = prod * self.g[b]
            got = prod.sum(axis=1)
            self._label_sums[labels] = got
        return got

    def _new_square_sum(self, labels: tuple, excluded: tuple) -> np.ndarray:
        """For each circle: sum over distinct new squares (outside excluded) carrying the labels,
        divided by the label multiset's symmetry."""
        total = np.zeros(self.ds.m)
        for part in _set_partitions(range(len(labels))):
            term = np.full(self.ds.m, float(_mobius(part)))
            for block in part:
                key = tuple(sorted(labels[r] for r in block))
                col = self._label_sum(key).copy()
                for j in excluded:
                    prod = np.ones(self.ds.m)
                    for b in key:
                        prod = prod * self.g[b, :, j]
                    col -= prod
                term = term * col
            total += term
        sym = 1
        for _, grp in itertools.groupby(sorted(labels)):
            sym *= math.factorial(len(list(grp)))
        return total / sym

    # -- evaluation -----------------------------------------------------

    def raw_unnormalized(self, K: tuple) -> float:
        """Sum over terms of n^{-|a|/2} prod_u l(|a_u|) h_{a_u}(x_u)/a_u!, truncated on total^K."""
        got = self._raw.get(K)
        if got is None:
            if self.single_circle:
                got = self._single_circle_value(K)
            else:
                got = self._reference_value(K)
            self._raw[K] = got
        return got

    def raw(self, K: tuple) -> float:
        return float(self.n) ** (-sum(K) / 2) * self.raw_unnormalized(K)

    def _single_circle_value(self, K: tuple) -> float:
        supp = tuple(i for i, e in enumerate(K) if e)
        value = 1.0 if all(e % 2 == 0 for e in K) else 0.0
        if self.ds.m == 0 or self.min_cost is None:
            return value
        budget = self.Dtrunc - len(supp) - self.circle_cost
        if budget < self.k:
            return value
        n = float(self.n)
        choices = []
        for i in supp:
            start = 1 if K[i] % 2 else 0
            choices.append(range(start, int(budget) + 1, 2))
        for core in itertools.product(*choices):
            core_w = sum(core)
            if core_w > budget:
                continue
            core_vec = np.ones(self.ds.m)
            for i, l in zip(supp, core):
                if l:
                    core_vec = core_vec * self.g[l, :, i]
            for extra in _even_label_multisets(int(budget - core_w)):
                w = core_w + sum(extra)
                if not self.weight_ok(w) or w + len(extra) > budget:
                    continue
                if extra:
                    if len(extra) > self.n - len(supp):
                        continue
                    vec = core_vec * self._new_square_sum(extra, supp)
                else:
                    vec = core_vec
                value += n ** (-w / 2) * self.lvals[w] * float(vec.sum())
        return value

    def _reference_value(self, K: tuple) -> float:
        """Direct evaluation over term classes with distinct circles (any number of circles)."""
        value = 0.0
        n = float(self.n)
        for cls in _term_classes(K, self.n, self.Dtrunc, self.circle_cost, self.weight_ok,
                                 max_circles=self.ds.m):
            if not cls:
                value += 1.0
                continue
            weight = 0
            factors = []
            coef = 1.0
            for p in cls:
                w = sum(l for _, l in p)
                weight += w
                coef *= self.lvals[w]
                factors.append(self._pattern_vector(p))
            sym = 1
            for _, grp in itertools.groupby(cls):
                sym *= math.factorial(len(list(grp)))
            value += coef * n ** (-weight / 2) * _distinct_sum(factors) / sym
        return value

    def reference_raw(self, K: tuple) -> float:
        return float(self.n) ** (-sum(K) / 2) * self._reference_value(K)

    def pseudo_expectation(self, I, reduce: bool = True) -> float:
        K = _multi_index(I, self.n)
        if not reduce:
            return self.raw(K)
        red = tuple(e % 2 for e in K)
        pairs = (sum(K) - sum(red)) // 2
        return float(self.n) ** (-pairs) * self.raw(red)


def _even_label_multisets(budget: int):
    """Non-increasing tuples of even labels >= 2 with labels + count <= budget."""
    def grow(remaining, cap, acc):
        yield tuple(acc)
        for b in range(min(cap, remaining - 1), 1, -1):
            if b % 2:
                continue
            acc.append(b)
            yield from grow(remaining - b - 1, b, acc)
            acc.pop()
    yield from grow(budget, budget, [])


def pseudo_expectation(I, dataset: Dataset, profile: MomentProfile, Dtrunc: int, k: int,
                       reduce: bool = True, circle_cost=1) -> float:
    """Pseudo-calibration value of v^I; exponents are first reduced mod 2 (v_i^2 = 1/n)."""
    return Calibration(dataset, profile, Dtrunc, k, circle_cost).pseudo_expectation(I, reduce)


@dataclass
class MomentMatrix:
    D: int
    n: int
    index: tuple
    values: np.ndarray
    scaled: bool

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])


def moment_matrix(dataset: Dataset, profile: MomentProfile, D: int, Dtrunc: int, k: int,
                  scaled: bool = True, circle_cost=1, calibration: Calibration | None = None,
                  reference: bool = False) -> MomentMatrix:
    """Degree-D pseudo-moment matrix with entry (I, J) from the calibration formula at I + J.

    The multi-index I + J is used as is: squares shared by I and J have exponent
    2 and count toward the truncation size, matching the graph-matrix expansion.
    The scaled variant multiplies entry (I, J) by n^{(|I|+|J|)/2}.
    """
    index = subsets(dataset.n, D)
    if len(index) > MAX_SUBSETS:
        raise CalibrationError(f"moment matrix would have {len(index)} rows, cap is {MAX_SUBSETS}")
    cal = calibration or Calibration(dataset, profile, Dtrunc, k, circle_cost)
    evaluate = cal._reference_value if reference else cal.raw_unnormalized
    n = dataset.n
    size = len(index)
    M = np.zeros((size, size))
    for a in range(size):
        I = index[a]
        for b in range(a, size):
            J = index[b]
            K = [0] * n
            for i in I:
                K[i] += 1
            for j in J:
                K[j] += 1
            val = evaluate(tuple(K))
            if not scaled:
                val *= float(n) ** (-(len(I) + len(J)) / 2)
            M[a, b] = M[b, a] = val
    return MomentMatrix(D, n, index, M, scaled)


# ---------------------------------------------------------------------------
# graph matrices


def embedding_estimate(shape: Shape, n: int, m: int) -> int:
    return n ** len(shape.squares) * m ** len(shape.circles)


def _indicator_rows(n: int, d: int) -> np.ndarray:
    rows = sorted(itertools.combinations(range(n), d), key=lambda s: s[::-1])
    out = np.zeros((len(rows), n))
    for r, S in enumerate(rows):
        out[r, list(S)] = 1.0
    return out


def _edgeless_block(shape: Shape, n: int) -> np.ndarray:
    """One ribbon per (I, J) with |I & J| equal to the number of shared squares."""
    shared = len(shape.Uset & shape.Vset)
    overlap = _indicator_rows(n, len(shape.U)) @ _indicator_rows(n, len(shape.V)).T
    return (overlap == shared).astype(float)


def spectral_norm(block: np.ndarray) -> float:
    if block.size == 0:
        return 0.0
    if min(block.shape) <= 400:
        return float(np.linalg.norm(block, 2))
    top = svds(block, k=1, tol=0, random_state=0, return_singular_vectors=False)
    return float(top[0])


def realize_block(shape: Shape, dataset: Dataset) -> np.ndarray:
    """The nonzero (|U|, |V|) block of the graph matrix: a sum over all ribbons of the shape."""
    n, m = dataset.n, dataset.m
    if shape.circles and m == 0:
        return np.zeros((math.comb(n, len(shape.U)), math.comb(n, len(shape.V))))
    if not shape.edges:
        if shape.circles:
            return np.zeros((math.comb(n, len(shape.U)), math.comb(n, len(shape.V))))
        return _edgeless_block(shape, n)
    est = embedding_estimate(shape, n, m)
    if est > EMBEDDING_BUDGET:
        raise CalibrationError(f"embedding count estimate {est:.3g} exceeds budget {EMBEDDING_BUDGET:.0e}")
    squares = list(shape.squares)
    q = len(squares)
    pos = {s: r for r, s in enumerate(squares)}
    top = max(l for _, _, l in shape.edges)
    H = dataset.hermite(top)
    letters = "abcdefghijklmnopqrstvwxyz"
    if q > len(letters):
        raise ShapeError("too many squares to realize")
    by_circle = {c: [(s, l) for s, cc, l in shape.edges if cc == c] for c in shape.circles}

    tensor = np.zeros((n,) * q)
    for part in _set_partitions(list(shape.circles)):
        term = np.full((n,) * q, float(_mobius(part)))
        for block in part:
            operands, subs, touched = [], [], []
            for c in block:
                for s, l in by_circle[c]:
                    operands.append(H[l])
                    subs.append("u" + letters[pos[s]])
                    if pos[s] not in touched:
                        touched.append(pos[s])
            touched.sort()
            out = "".join(letters[t] for t in touched)
            vals = np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)
            shape_b = [n if t in touched else 1 for t in range(q)]
            term = term * vals.reshape(shape_b)
        tensor += term

    labels = np.indices((n,) * q).reshape(q, -1)
    flat = tensor.reshape(-1)
    keep = np.ones(flat.shape[0], dtype=bool)
    for r1 in range(q):
        for r2 in range(r1 + 1, q):
            keep &= labels[r1] != labels[r2]
    labels = labels[:, keep]
    flat = flat[keep]
    u_rows = np.sort(labels[[pos[s] for s in shape.U]], axis=0)
    v_rows = np.sort(labels[[pos[s] for s in shape.V]], axis=0)
    rr = colex_rank(u_rows)
    cc = colex_rank(v_rows)
    nr, nc = math.comb(n, len(shape.U)), math.comb(n, len(shape.V))
    block = np.bincount(rr * nc + cc, weights=flat, minlength=nr * nc).reshape(nr, nc)
    return block / automorphism_count(shape)


def realize_graph_matrix(shape: Shape, dataset: Dataset, D: int | None = None) -> np.ndarray:
    """Graph matrix of the shape on the full subset index of sizes 0..D."""
    if D is None:
        D = max(len(shape.U), len(shape.V))
    if len(shape.U) > D or len(shape.V) > D:
        raise CalibrationError(f"shape index sizes exceed D={D}")
    offs = level_offsets(dataset.n, D)
    out = np.zeros((offs[-1], offs[-1]))
    a, b = len(shape.U), len(shape.V)
    out[offs[a]:offs[a + 1], offs[b]:offs[b + 1]] = realize_block(shape, dataset)
    return out


def shape_weight(shape: Shape, profile: MomentProfile, n: int) -> float:
    return float(hermite_coefficient(shape, profile)) * scaling_coefficient(shape, n)


def realize_combination(terms, dataset: Dataset, D: int, include_lambda_eta: bool = True,
                        profile: MomentProfile | None = None) -> np.ndarray:
    """Sum of coefficient * (eta * lambda) * M_shape over the given (shape, coefficient) pairs."""
    size = level_offsets(dataset.n, D)[-1]
    out = np.zeros((size, size))
    for shape, coef in terms:
        scale = float(coef)
        if include_lambda_eta:
            if profile is None:
                raise CalibrationError("a profile is needed for the Hermite coefficients")
            scale *= shape_weight(shape, profile, dataset.n)
        if scale:
            out += scale * realize_graph_matrix(shape, dataset, D)
    return out


def expansion_shapes(profile: MomentProfile, D: int, Dtrunc: int) -> list[Shape]:
    """Proper shapes with even square total degrees, total <= Dtrunc and nonzero coefficient."""
    shapes = enumerate_shapes(Dtrunc, D, proper=True, even_square_total_degree=True)
    return [s for s in shapes if hermite_coefficient(s, profile) != 0]


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / (1 + np.abs(b))))


def expansion_check(dataset: Dataset, profile: MomentProfile, D: int, Dtrunc: int, k: int,
                    drop: int | None = None, circle_cost=1) -> float:
    """Max relative entry error between the scaled moment matrix and its shape expansion.

    drop removes one shape from the expansion (negative control).
    """
    mm = moment_matrix(dataset, profile, D, Dtrunc, k, scaled=True, circle_cost=circle_cost)
    shapes = expansion_shapes(profile, D, Dtrunc)
    if drop is not None:
        shapes = shapes[:drop] + shapes[drop + 1:]
    approx = realize_combination([(s, 1) for s in shapes], dataset, D, profile=profile)
    return relative_error(approx, mm.values)


def left_shapes_for_l(profile: MomentProfile, D: int, Dtrunc: int) -> list[Shape]:
    """Proper left shapes with |U|, |V| <= D, total <= Dtrunc, even total degree off V, nonzero coefficient."""
    out = []
    for s in enumerate_shapes(Dtrunc, D, proper=True):
        if any(s.total_degree(v) % 2 for v in s.squares if v not in s.Vset):
            continue
        if hermite_coefficient(s, profile) == 0 or not is_left(s):
            continue
        out.append(s)
    return out


def l_matrix(dataset: Dataset, profile: MomentProfile, D: int, Dtrunc: int) -> np.ndarray:
    shapes = left_shapes_for_l(profile, D, Dtrunc)
    return realize_combination([(s, 1) for s in shapes], dataset, D, profile=profile)


def l_conditioning(dataset: Dataset, profile: MomentProfile, D: int, Dtrunc: int) -> tuple[float, float]:
    """Smallest singular value of the realized L and the lower bound (9 Dtrunc^2 n)^(-D)."""
    L = l_matrix(dataset, profile, D, Dtrunc)
    smin = float(np.linalg.svd(L, compute_uv=False)[-1])
    return smin, float(9 * Dtrunc**2 * dataset.n) ** (-D)


# ---------------------------------------------------------------------------
# oracles


def booleanity_check(dataset: Dataset, profile: MomentProfile, D: int, Dtrunc: int, k: int,
                     reduce: bool = True, circle_cost=1) -> float:
    """Max |E(v^{I+2e_i}) - E(v^I)/n| over multi-indices |I| <= 2D-2 and coordinates i.

    reduce=False evaluates the unreduced formula directly (negative control).
    """
    cal = Calibration(dataset, profile, Dtrunc, k, circle_cost)
    n = dataset.n
    worst = 0.0
    for deg in range(0, 2 * D - 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            I = [0] * n
            for i in combo:
                I[i] += 1
            base = cal.pseudo_expectation(tuple(I), reduce) / n
            for i in range(n):
                I[i] += 2
                worst = max(worst, abs(cal.pseudo_expectation(tuple(I), reduce) - base))
                I[i] -= 2
    return worst


def hermite_test(dataset: Dataset, profile: MomentProfile, j: int, D: int, Dtrunc: int, k: int,
                 calibration: Calibration | None = None, circle_cost=1) -> float:
    """(1/m) sum_u E(h_j(<x_u, v>)) - l_j E(1), with h_j expanded over multi-indices of degree j."""
    if j > 2 * D:
        raise CalibrationError(f"Hermite test degree {j} exceeds 2D = {2 * D}")
    if dataset.m == 0:
        return 0.0
    cal = calibration or Calibration(dataset, profile, Dtrunc, k, circle_cost)
    n = dataset.n
    H = dataset.hermite(max(j, 1))
    total = 0.0
    fj = math.factorial(j)
    for combo in itertools.combinations_with_replacement(range(n), j):
        J = {}
        for i in combo:
            J[i] = J.get(i, 0) + 1
        pairs = 0
        vec = np.ones(dataset.m)
        for i, e in J.items():
            vec = vec * H[e, :, i]
            pairs += e // 2
        denom = 1
        for e in J.values():
            denom *= math.factorial(e)
        red = [0] * n
        for i, e in J.items():
            red[i] = e % 2
        value = cal.raw(tuple(red))
        if value == 0.0:
            continue
        total += (fj / denom) * float(n) ** (-pairs) * value * float(vec.mean())
    return total - _profile_value(profile, j) * cal.raw((0,) * n)
