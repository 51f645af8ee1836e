import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from ngca_sos import dist, shape as sh
from ngca_sos.shape import Shape


def path_shape():
    return Shape.build(["a", "b"], ["w"], ["a"], ["b"], [("a", "w", 1), ("b", "w", 1)])


def bowtie():
    """u1 u2 u3 - w1 - x - w2 - v1 v2 v3"""
    us, vs = ["u1", "u2", "u3"], ["v1", "v2", "v3"]
    edges = [(u, "w1", 1) for u in us] + [("x", "w1", 1), ("x", "w2", 1)] + [(v, "w2", 1) for v in vs]
    return Shape.build(us + ["x"] + vs, ["w1", "w2"], us, vs, edges)


def random_shape(rng, max_vertices=10):
    total = int(rng.integers(2, max_vertices + 1))
    c = int(rng.integers(0, min(4, total - 1) + 1))
    q = total - c
    squares = [f"s{r}" for r in range(q)]
    circles = [f"c{r}" for r in range(c)]
    U = [s for s in squares if rng.random() < 0.4]
    V = [s for s in squares if rng.random() < 0.4]
    edges = [(s, w, 1) for s in squares for w in circles if rng.random() < 0.4]
    return Shape.build(squares, circles, U, V, edges)


class TestShapeType:
    def test_validation(self):
        with pytest.raises(sh.ShapeError):
            Shape.build(["a"], ["w"], ["w"], [], [])
        with pytest.raises(sh.ShapeError):
            Shape.build(["a", "b"], ["w"], [], [], [("a", "b", 1)])
        with pytest.raises(sh.ShapeError):
            Shape.build(["a"], ["w"], ["a", "a"], [], [])
        with pytest.raises(sh.ShapeError):
            Shape.build(["a"], ["w"], [], [], [("a", "w", 0)])

    def test_json_roundtrip(self):
        s = bowtie()
        assert Shape.from_json(s.to_json()) == s
        with pytest.raises(sh.ShapeError, match="missing key"):
            Shape.from_json({"squares": []})


class TestMetrics:
    def test_trivial(self):
        assert sh.metrics(sh.trivial_shape(3), 10, 10).total_size == 3

    def test_spider(self):
        met = sh.metrics(sh.spider_shape(2, 2, 0), 16, 64)
        assert met.total_size == 9 and met.edge_weight == 4
        assert met.vertex_weight == pytest.approx(4 + 1.5)

    def test_single_edge(self):
        s = Shape.build(["a"], ["w"], ["a"], ["a"], [("a", "w", 1)])
        assert sh.metrics(s, 5, 5).total_size == 3

    def test_coefficients(self):
        s = Shape.build(["a", "b"], ["w"], ["a"], ["b"], [("a", "w", 2), ("b", "w", 2)])
        p = dist.make_profile("rademacher", 8)
        assert sh.hermite_coefficient(s, p) == Fraction(-2, 4)
        assert sh.scaling_coefficient(s, 9) == pytest.approx(9.0**-2)

    def test_bad_sizes(self):
        with pytest.raises(sh.ShapeError):
            sh.metrics(path_shape(), 1, 3)


class TestSquareSeparator:
    def test_path(self):
        assert sh.min_square_separator(path_shape()) == (1, frozenset({"a"}), frozenset({"b"}))

    def test_spider_231(self):
        s = sh.spider_shape(2, 3, 1)
        size, left, right = sh.min_square_separator(s)
        assert size == 3 == len(s.U)
        assert left == right == s.Uset

    def test_trivial(self):
        s = sh.trivial_shape(3)
        assert sh.min_square_separator(s) == (3, s.Uset, s.Uset)

    def test_menger_random(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            s = random_shape(rng)
            size, left, right = sh.min_square_separator(s)
            brute, seps = sh.brute_min_square_separators(s)
            assert size == brute
            paths = sh.disjoint_paths(s)
            assert len(paths) == size
            used = [v for p in paths for v in p]
            assert len(used) == len(set(used))
            assert left in seps and right in seps
            for T in seps:
                assert sh.separates(s, left, s.U, T)
                assert sh.separates(s, right, T, s.V)


class TestWeightSeparator:
    def test_circle_cheaper(self):
        res = sh.min_weight_separator(sh.spider_shape(2, 2, 0), circle_w=Fraction(3, 2))
        assert res["weight"] == Fraction(3, 2)
        assert res["all_min"] == [frozenset({"w"})]

    def test_circle_dearer(self):
        s = sh.spider_shape(2, 2, 0)
        res = sh.min_weight_separator(s, circle_w=Fraction(5, 2))
        assert res["weight"] == 2
        assert set(res["all_min"]) == {s.Uset, s.Vset}
        assert res["leftmost"] == s.Uset and res["rightmost"] == s.Vset

    def test_from_sizes(self):
        res = sh.min_weight_separator(sh.spider_shape(2, 2, 0), n=16, m=64)
        assert res["weight"] == pytest.approx(1.5)

    def test_trivial(self):
        assert sh.min_weight_separator(sh.trivial_shape(4), circle_w=1)["weight"] == 4

    def test_lattice_property_random(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            s = random_shape(rng, 9)
            res = sh.min_weight_separator(s, circle_w=Fraction(3, 2))
            for T in res["all_min"]:
                assert sh.separates(s, res["leftmost"], s.U, T)
                assert sh.separates(s, res["rightmost"], T, s.V)


class TestClassifyAndDecompose:
    def test_classify(self):
        c = sh.classify(sh.spider_shape(3, 1, 0))
        assert c["is_left"] and c["is_proper"] and not c["is_middle"] and not c["is_right"]
        c = sh.classify(sh.spider_shape(2, 2, 0))
        assert c["is_middle"] and c["is_proper"] and not c["is_left"]
        c = sh.classify(sh.trivial_shape(2))
        assert c["is_trivial"] and c["is_left"] and c["is_right"] and c["is_middle"]

    def test_figure_shape(self):
        left, middle, right = sh.canonical_decomposition(bowtie())
        assert left.V == ("x",) and right.U == ("x",)
        assert middle.U == middle.V == ("x",)

    def test_left_shape(self):
        s = sh.spider_shape(3, 1, 0)
        left, middle, right = sh.canonical_decomposition(s)
        assert sh.same_shape(left, s)
        assert sh.is_trivial(middle) and sh.is_trivial(right)
        assert middle.Uset == s.Vset

    def test_middle_shape(self):
        s = sh.spider_shape(2, 2, 0)
        left, middle, right = sh.canonical_decomposition(s)
        assert sh.same_shape(middle, s)
        assert sh.is_trivial(left) and sh.is_trivial(right)

    def test_roundtrip_on_enumerated(self):
        shapes = sh.enumerate_shapes(8, 3, min_circle_degree=2)
        assert len(shapes) > 50
        for s in shapes:
            left, middle, right = sh.canonical_decomposition(s)
            assert sh.same_shape(sh.compose_parts(left, middle, right), s)
            assert sh.is_left(left) and sh.is_middle(middle) and sh.is_right(right)


class TestNorms:
    def test_trivial(self):
        anorm, bound = sh.anorm_and_bound(sh.trivial_shape(3), 20, 50)
        assert anorm == pytest.approx(1)
        assert bound == pytest.approx(1)

    def test_spider(self):
        n = 16
        anorm, bound = sh.anorm_and_bound(sh.spider_shape(2, 2, 0), n, 64)
        assert anorm == pytest.approx(n**2)
        assert bound >= anorm

    def test_isolated_square(self):
        base = sh.trivial_shape(2)
        extra = Shape.build(list(base.squares) + ["z"], [], base.U, base.V, [])
        assert sh.anorm_exponent(extra, 1) == sh.anorm_exponent(base, 1) + 1


class TestSlack:
    def test_dominant_spider(self):
        assert sh.middle_slack(sh.spider_shape(2, 2, 0), Fraction(1, 5), 4) == 0

    def test_separator_on_a_side(self):
        eps, k = Fraction(1, 5), 4
        slack = sh.middle_slack(sh.spider_shape(2, 2, 0), eps, k, circle_w=Fraction(5, 2))
        assert slack >= k * eps / 8 > 0

    def test_internal_square_default(self):
        eps = Fraction(1, 5)
        s = Shape.build(["a", "x", "b"], ["w1", "w2"], ["a"], ["b"],
                        [("a", "w1", 1), ("x", "w1", 1), ("x", "w2", 1), ("b", "w2", 1)])
        assert sh.default_slack(s, eps) == eps / 4

    def test_preconditions_name_vertex(self):
        with pytest.raises(sh.ShapeError, match="'w'"):
            sh.middle_slack(sh.spider_shape(1, 1, 0), Fraction(1, 5), 4)
        with pytest.raises(sh.ShapeError, match="middle"):
            sh.middle_slack(sh.spider_shape(3, 1, 0), Fraction(1, 5), 4)

    def test_charge_inequality(self):
        shapes = sh.enumerate_shapes(8, 4, min_circle_degree=4)
        middles = [s for s in shapes if sh.is_middle(s) and s.circles
                   and all(s.total_degree(v) >= 2 for v in s.squares)]
        assert middles
        for s in middles:
            ok, lhs, rhs = sh.slack_inequality(s, Fraction(1, 5), 4)
            assert ok, (s, lhs, rhs)


class TestEnumeration:
    def test_small(self):
        shapes = sh.enumerate_shapes(3, 1, proper=False)
        single = Shape.build(["s0"], ["c0"], ["s0"], ["s0"], [("s0", "c0", 1)])
        assert any(sh.isomorphic(single, s) for s in shapes)
        assert any(sh.isomorphic(sh.trivial_shape(1), s) for s in shapes)
        assert any(sh.isomorphic(sh.trivial_shape(0), s) for s in shapes)

    def test_count_bound_and_uniqueness(self):
        shapes = sh.enumerate_shapes(7, 3)
        by_total = {}
        for s in shapes:
            by_total[s.total] = by_total.get(s.total, 0) + 1
        # three one-square shapes (U only, V only, both) already beat 1^3
        assert by_total[1] == 3
        for total, count in by_total.items():
            if total >= 2:
                assert count <= total ** (3 * total)
        buckets = {}
        for s in shapes:
            buckets.setdefault(sh.shape_hash(s), []).append(s)
        for group in buckets.values():
            for a, b in itertools.combinations(group, 2):
                assert not sh.isomorphic(a, b)

    def test_every_spider_once(self):
        max_total = 8
        shapes = sh.enumerate_shapes(max_total, 3)
        for i, j, u in itertools.product(range(4), repeat=3):
            spd = sh.spider_shape(i, j, u)
            if i + u > 3 or j + u > 3 or spd.total > max_total or not sh.is_proper(spd):
                continue
            assert sum(1 for s in shapes if sh.isomorphic(s, spd)) == 1

    def test_cap(self):
        with pytest.raises(sh.ShapeError):
            sh.enumerate_shapes(11, 2)

    def test_automorphisms(self):
        assert sh.automorphism_count(sh.spider_shape(2, 2, 0)) == 4
        assert sh.automorphism_count(sh.spider_shape(3, 1, 1)) == 6
