"""Shapes: bipartite square/circle graphs with left and right index sets.

Covers size and weight metrics, minimum square and minimum weight separators,
the square canonical decomposition, approximate norm bounds and middle-shape
slack.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import networkx as nx
from networkx.algorithms import isomorphism
from networkx.algorithms.flow import edmonds_karp


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Shape:
    squares: tuple
    circles: tuple
    U: tuple
    V: tuple
    edges: tuple  # (square, circle, label)

    def __post_init__(self):
        sq, ci = set(self.squares), set(self.circles)
        if len(sq) != len(self.squares) or len(ci) != len(self.circles):
            raise ShapeError("duplicate vertex ids")
        if sq & ci:
            raise ShapeError(f"ids used as both square and circle: {sorted(sq & ci)}")
        for side, name in ((self.U, "U"), (self.V, "V")):
            if len(set(side)) != len(side):
                raise ShapeError(f"{name} repeats a vertex")
            bad = [v for v in side if v not in sq]
            if bad:
                raise ShapeError(f"{name} contains non-square vertices {bad}")
        for s, c, label in self.edges:
            if s not in sq or c not in ci:
                raise ShapeError(f"edge ({s}, {c}) must join a square to a circle")
            if label < 1:
                raise ShapeError(f"edge ({s}, {c}) has label {label} < 1")

    @classmethod
    def build(cls, squares, circles, U, V, edges) -> Shape:
        return cls(tuple(squares), tuple(circles), tuple(U), tuple(V), tuple(tuple(e) for e in edges))

    @classmethod
    def from_json(cls, data) -> Shape:
        if isinstance(data, str):
            data = json.loads(data)
        try:
            return cls.build(data["squares"], data.get("circles", []), data["U"], data["V"], data.get("edges", []))
        except KeyError as exc:
            raise ShapeError(f"shape literal is missing key {exc.args[0]!r}") from None

    def to_json(self) -> dict:
        return {"squares": list(self.squares), "circles": list(self.circles), "U": list(self.U),
                "V": list(self.V), "edges": [list(e) for e in self.edges]}

    @property
    def Uset(self) -> frozenset:
        return frozenset(self.U)

    @property
    def Vset(self) -> frozenset:
        return frozenset(self.V)

    def transpose(self) -> Shape:
        return Shape(self.squares, self.circles, self.V, self.U, self.edges)

    def degree(self, v) -> int:
        return sum(l for s, c, l in self.edges if v in (s, c))

    def total_degree(self, v) -> int:
        return self.degree(v) + (v in self.Uset) + (v in self.Vset)

    @property
    def edge_weight(self) -> int:
        return sum(l for _, _, l in self.edges)

    @property
    def total(self) -> int:
        return len(self.squares) + len(self.circles) + self.edge_weight

    def neighbors(self) -> dict:
        adj = {v: set() for v in self.squares + self.circles}
        for s, c, _ in self.edges:
            adj[s].add(c)
            adj[c].add(s)
        return adj

    def middle(self) -> set:
        return set(self.squares + self.circles) - self.Uset - self.Vset

    def isolated_middle(self) -> set:
        adj = self.neighbors()
        return {v for v in self.middle() if not adj[v]}


def spider_shape(i: int, j: int, u: int) -> Shape:
    """S(i, j; u) as a shape: one circle, i left legs, j right legs, u shared squares."""
    left = [f"l{r}" for r in range(i)]
    right = [f"r{r}" for r in range(j)]
    shared = [f"t{r}" for r in range(u)]
    circles = ["w"] if i + j else []
    edges = [(s, "w", 1) for s in left + right]
    return Shape.build(left + right + shared, circles, left + shared, shared + right, edges)


def trivial_shape(u: int) -> Shape:
    sq = [f"t{r}" for r in range(u)]
    return Shape.build(sq, [], sq, sq, [])


# ---------------------------------------------------------------------------
# metrics and coefficients


@dataclass(frozen=True)
class ShapeMetrics:
    total_size: int
    edge_weight: int
    vertex_weight: float
    degrees: dict
    total_degrees: dict


def circle_weight(n: int, m: int) -> float:
    return math.log(m) / math.log(n) if m > 0 else float("-inf")


def metrics(shape: Shape, n: int, m: int) -> ShapeMetrics:
    if n < 2 or m < 1:
        raise ShapeError(f"need n >= 2 and m >= 1, got n={n}, m={m}")
    w = circle_weight(n, m)
    return ShapeMetrics(
        total_size=shape.total,
        edge_weight=shape.edge_weight,
        vertex_weight=len(shape.squares) + w * len(shape.circles),
        degrees={v: shape.degree(v) for v in shape.squares + shape.circles},
        total_degrees={v: shape.total_degree(v) for v in shape.squares + shape.circles},
    )


def scaling_coefficient(shape: Shape, n: int) -> float:
    return float(n) ** (-shape.edge_weight / 2)


def hermite_coefficient(shape: Shape, profile):
    """Product of l(deg) over circles divided by the product of label factorials."""
    num = 1
    for c in shape.circles:
        num *= profile(shape.degree(c))
    den = 1
    for _, _, l in shape.edges:
        den *= factorial(l)
    return Fraction(num, den) if isinstance(num, (int, Fraction)) else num / den


# ---------------------------------------------------------------------------
# separators


def _reachable(shape: Shape, sources, blocked: set) -> set:
    """Vertices reachable from the unblocked sources along paths avoiding blocked vertices."""
    adj = shape.neighbors()
    seen = {v for v in sources if v not in blocked}
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in blocked and w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def is_separator(shape: Shape, S) -> bool:
    """Every U-V path (including length-0 ones) meets S."""
    S = set(S)
    return not (_reachable(shape, shape.U, S) & (shape.Vset - S))


def separates(shape: Shape, S, A, B) -> bool:
    """Every path from A to B meets S."""
    S = set(S)
    return not (_reachable(shape, A, S) & (set(B) - S))


def _flow_network(shape: Shape, square_cap, circle_cap):
    big = len(shape.squares) + len(shape.circles) + 1
    G = nx.DiGraph()
    for v in shape.squares:
        G.add_edge(("in", v), ("out", v), capacity=square_cap(v))
    for v in shape.circles:
        G.add_edge(("in", v), ("out", v), capacity=circle_cap(v))
    for s, c, _ in shape.edges:
        G.add_edge(("out", s), ("in", c), capacity=big)
        G.add_edge(("out", c), ("in", s), capacity=big)
    G.add_node("source")
    G.add_node("sink")
    for v in shape.U:
        G.add_edge("source", ("in", v), capacity=big)
    for v in shape.V:
        G.add_edge(("out", v), "sink", capacity=big)
    return G


def _cut_sides(shape: Shape, G):
    R = edmonds_karp(G, "source", "sink")
    value = R.graph["flow_value"]
    residual = nx.DiGraph((u, v) for u, v, d in R.edges(data=True) if d["capacity"] - d["flow"] > 0)
    residual.add_nodes_from(["source", "sink"])
    from_source = nx.descendants(residual, "source") | {"source"}
    to_sink = nx.ancestors(residual, "sink") | {"sink"}
    verts = shape.squares + shape.circles
    left = {v for v in verts if ("in", v) in from_source and ("out", v) not in from_source}
    right = {v for v in verts if ("out", v) in to_sink and ("in", v) not in to_sink}
    return value, left, right, R


def min_square_separator(shape: Shape) -> tuple[int, frozenset, frozenset]:
    """Size and leftmost/rightmost minimum square separators (vertex-split max flow)."""
    G = _flow_network(shape, lambda v: 1, lambda v: len(shape.squares) + len(shape.circles) + 1)
    value, left, right, _ = _cut_sides(shape, G)
    shared_isolated = {v for v in shape.Uset & shape.Vset if shape.degree(v) == 0}
    left |= shared_isolated
    right |= shared_isolated
    if len(left) != value or len(right) != value:
        raise AssertionError("cut extraction disagrees with the flow value")
    return int(value), frozenset(left), frozenset(right)


def disjoint_paths(shape: Shape) -> list[list]:
    """A maximum family of square-disjoint U-V paths, read off the max flow."""
    G = _flow_network(shape, lambda v: 1, lambda v: len(shape.squares) + len(shape.circles) + 1)
    _, _, _, R = _cut_sides(shape, G)
    flow = {(u, v): d["flow"] for u, v, d in R.edges(data=True) if d["flow"] > 0}
    paths = []
    while True:
        node, path = "source", []
        while node != "sink":
            nxt = next((v for (u, v), f in flow.items() if u == node and f > 0), None)
            if nxt is None:
                return paths
            flow[(node, nxt)] -= 1
            if isinstance(nxt, tuple) and nxt[0] == "in":
                path.append(nxt[1])
            node = nxt
        paths.append(path)


def brute_min_square_separators(shape: Shape) -> tuple[int, list[frozenset]]:
    """All minimum square separators by exhaustive search."""
    sq = list(shape.squares)
    for r in range(len(sq) + 1):
        found = [frozenset(S) for S in itertools.combinations(sq, r) if is_separator(shape, S)]
        if found:
            return r, found
    raise AssertionError("the full square set always separates")


def vertex_weights(shape: Shape, circle_w) -> dict:
    return {**{v: 1 for v in shape.squares}, **{v: circle_w for v in shape.circles}}


def all_min_weight_separators(shape: Shape, circle_w) -> tuple:
    """Minimum weight and all minimum weight separators (exhaustive, <= 16 vertices)."""
    verts = list(shape.squares + shape.circles)
    if len(verts) > 16:
        raise ShapeError(f"exhaustive separator search capped at 16 vertices, shape has {len(verts)}")
    w = vertex_weights(shape, circle_w)
    best, found = None, []
    for r in range(len(verts) + 1):
        for S in itertools.combinations(verts, r):
            weight = sum((w[v] for v in S), 0)
            if best is not None and weight > best:
                continue
            if is_separator(shape, S):
                if best is None or weight < best:
                    best, found = weight, [frozenset(S)]
                else:
                    found.append(frozenset(S))
    return best, found


def _leftmost(shape: Shape, seps: list[frozenset]) -> frozenset:
    for S in seps:
        if all(separates(shape, S, shape.U, T) for T in seps):
            return S
    raise AssertionError("no leftmost separator found")


def min_weight_separator(shape: Shape, n: int | None = None, m: int | None = None, circle_w=None) -> dict:
    """Minimum weight separator with leftmost/rightmost members and (small shapes) all minima.

    The circle weight is log_n m, or the given circle_w (a Fraction keeps the
    comparison exact).
    """
    if circle_w is None:
        circle_w = circle_weight(n, m)
    verts = shape.squares + shape.circles
    if len(verts) <= 16:
        weight, seps = all_min_weight_separators(shape, circle_w)
        return {
            "weight": weight,
            "leftmost": _leftmost(shape, seps),
            "rightmost": _leftmost(shape.transpose(), seps),
            "all_min": seps,
        }
    G = _flow_network(shape, lambda v: 1, lambda v: float(circle_w))
    value, left, right, _ = _cut_sides(shape, G)
    shared_isolated = {v for v in shape.Uset & shape.Vset if shape.degree(v) == 0}
    return {"weight": value, "leftmost": frozenset(left | shared_isolated),
            "rightmost": frozenset(right | shared_isolated), "all_min": None}


# ---------------------------------------------------------------------------
# classification and decomposition


def is_proper(shape: Shape) -> bool:
    pairs = [(s, c) for s, c, _ in shape.edges]
    return len(pairs) == len(set(pairs)) and not shape.isolated_middle()


def is_trivial(shape: Shape) -> bool:
    verts = set(shape.squares + shape.circles)
    return not shape.edges and verts == shape.Uset == shape.Vset


def is_left(shape: Shape) -> bool:
    _, seps = brute_min_square_separators(shape)
    if seps != [shape.Vset]:
        return False
    reach = _reachable(shape, shape.U, set(shape.V))
    return set(shape.squares + shape.circles) - shape.Vset <= reach


def is_right(shape: Shape) -> bool:
    return is_left(shape.transpose())


def is_middle(shape: Shape) -> bool:
    size, _, _ = min_square_separator(shape)
    return len(shape.U) == size == len(shape.V)


def classify(shape: Shape) -> dict:
    return {
        "is_proper": is_proper(shape),
        "is_left": is_left(shape),
        "is_right": is_right(shape),
        "is_middle": is_middle(shape),
        "is_trivial": is_trivial(shape),
    }


def _sub_shape(shape: Shape, verts: set, edges: list, U, V) -> Shape:
    return Shape.build(
        [v for v in shape.squares if v in verts],
        [v for v in shape.circles if v in verts],
        list(U),
        list(V),
        edges,
    )


def canonical_decomposition(shape: Shape) -> tuple[Shape, Shape, Shape]:
    """Split at the leftmost and rightmost minimum square separators."""
    _, S_l, S_r = min_square_separator(shape)
    left_region = _reachable(shape, shape.U, set(S_l))
    right_region = _reachable(shape, shape.V, set(S_r))
    all_verts = set(shape.squares + shape.circles)
    middle_region = all_verts - left_region - right_region
    order = {v: r for r, v in enumerate(shape.squares)}
    sl = sorted(S_l, key=order.get)
    sr = sorted(S_r, key=order.get)
    left_edges = [e for e in shape.edges if e[1] in left_region]
    right_edges = [e for e in shape.edges if e[1] in right_region]
    mid_edges = [e for e in shape.edges if e[1] in middle_region]
    left = _sub_shape(shape, left_region | set(S_l), left_edges, shape.U, sl)
    right = _sub_shape(shape, right_region | set(S_r), right_edges, sr, shape.V)
    middle = _sub_shape(shape, middle_region | set(S_l) | set(S_r), mid_edges, sl, sr)
    return left, middle, right


def compose_parts(left: Shape, middle: Shape, right: Shape) -> Shape:
    """Glue decomposition parts back together along shared vertex ids."""
    squares = list(dict.fromkeys(left.squares + middle.squares + right.squares))
    circles = list(dict.fromkeys(left.circles + middle.circles + right.circles))
    edges = list(dict.fromkeys(left.edges + middle.edges + right.edges))
    return Shape.build(squares, circles, left.U, right.V, edges)


def same_shape(a: Shape, b: Shape) -> bool:
    return (set(a.squares) == set(b.squares) and set(a.circles) == set(b.circles)
            and a.Uset == b.Uset and a.Vset == b.Vset and set(a.edges) == set(b.edges))


# ---------------------------------------------------------------------------
# norm bounds and slack


def anorm_exponent(shape: Shape, circle_w, sep_weight=None):
    """Exponent of n in the approximate norm bound."""
    if sep_weight is None:
        sep_weight = min_weight_separator(shape, circle_w=circle_w)["weight"]
    w = vertex_weights(shape, circle_w)
    total_w = sum((w[v] for v in shape.squares + shape.circles), 0)
    iso_w = sum((w[v] for v in shape.isolated_middle()), 0)
    return (total_w + iso_w - sep_weight) / 2


def anorm_and_bound(shape: Shape, n: int, m: int, C_univ: float = 1.0) -> tuple[float, float]:
    """Approximate norm bound and the polylog-inflated norm bound."""
    cw = circle_weight(n, m)
    anorm = float(n) ** anorm_exponent(shape, cw)
    size = max(len(shape.U), len(shape.V), 1)
    outside = len(set(shape.squares + shape.circles) - (shape.Uset & shape.Vset))
    base = (1 + shape.edge_weight) * size * math.log(m * n)
    return anorm, base ** (C_univ * (outside + shape.edge_weight)) * anorm


def default_slack(shape: Shape, eps) -> Fraction:
    total = Fraction(0)
    for v in shape.squares:
        d = shape.degree(v)
        inU, inV = v in shape.Uset, v in shape.Vset
        if inU and inV:
            total += Fraction(d, 4)
        elif inU or inV:
            total += Fraction(d - 1, 4)
        else:
            total += Fraction(d - 2, 4) + eps * d / 8
    return total


def extra_slack(shape: Shape, S, eps, k: int) -> Fraction:
    circles_out = sum(1 for v in shape.circles if v not in S)
    squares_in = sum(1 for v in shape.squares if v in S and not (v in shape.Uset and v in shape.Vset))
    return Fraction(k) * eps / 8 * circles_out + eps / 4 * squares_in


def middle_slack(shape: Shape, eps, k: int, circle_w=None) -> Fraction:
    """Default slack plus the best extra slack over minimum weight separators."""
    eps = Fraction(eps)
    if circle_w is None:
        circle_w = (1 - eps) * k / 2
    if len(shape.squares) + len(shape.circles) > 16:
        raise ShapeError("slack needs exhaustive separator search (at most 16 vertices)")
    if not is_proper(shape):
        raise ShapeError("slack is defined for proper middle shapes")
    if not is_middle(shape):
        raise ShapeError("slack is defined for middle shapes")
    for v in shape.circles:
        if shape.degree(v) < k:
            raise ShapeError(f"circle {v!r} has degree {shape.degree(v)} < k={k}")
    for v in shape.squares:
        if shape.total_degree(v) < 2:
            raise ShapeError(f"square {v!r} has total degree {shape.total_degree(v)} < 2")
    _, seps = all_min_weight_separators(shape, circle_w)
    return default_slack(shape, eps) + max(extra_slack(shape, S, eps, k) for S in seps)


def slack_inequality(shape: Shape, eps, k: int) -> tuple[bool, Fraction, Fraction]:
    """Check lambda * Anorm <= n^(-slack) as an exact comparison of n-exponents."""
    eps = Fraction(eps)
    cw = (1 - eps) * k / 2
    lhs = Fraction(-shape.edge_weight, 2) + anorm_exponent(shape, cw)
    rhs = -middle_slack(shape, eps, k, cw)
    return lhs <= rhs, lhs, rhs


# ---------------------------------------------------------------------------
# automorphisms and enumeration


def to_graph(shape: Shape) -> nx.Graph:
    G = nx.Graph()
    for v in shape.squares:
        G.add_node(("s", v), kind=("s", v in shape.Uset, v in shape.Vset))
    for v in shape.circles:
        G.add_node(("c", v), kind=("c", False, False))
    for s, c, l in shape.edges:
        G.add_edge(("s", s), ("c", c), label=l)
    return G


def _matcher(a: Shape, b: Shape):
    return isomorphism.GraphMatcher(
        to_graph(a), to_graph(b),
        node_match=lambda x, y: x["kind"] == y["kind"],
        edge_match=lambda x, y: x["label"] == y["label"],
    )


def automorphism_count(shape: Shape) -> int:
    return sum(1 for _ in _matcher(shape, shape).isomorphisms_iter())


def isomorphic(a: Shape, b: Shape) -> bool:
    return _matcher(a, b).is_isomorphic()


def shape_hash(shape: Shape) -> str:
    G = to_graph(shape)
    for v, d in G.nodes(data=True):
        d["tag"] = str(d["kind"])
    for _, _, d in G.edges(data=True):
        d["tag"] = str(d["label"])
    return nx.weisfeiler_lehman_graph_hash(G, node_attr="tag", edge_attr="tag")


def _label_matrices(cells: int, max_weight: int):
    """All label vectors over the given number of cells with sum <= max_weight."""
    if cells == 0:
        yield ()
        return
    for first in range(max_weight + 1):
        for rest in _label_matrices(cells - 1, max_weight - first):
            yield (first,) + rest


def enumerate_shapes(max_total: int, max_index: int, proper: bool = True,
                     even_square_total_degree: bool = False, min_circle_degree: int = 1,
                     max_circles: int | None = None) -> list[Shape]:
    """All shapes up to isomorphism with total <= max_total and |U|, |V| <= max_index."""
    if max_total > 10:
        raise ShapeError("enumeration is capped at total size 10")
    found: dict[str, list[Shape]] = {}
    out = []
    for c in range(0, max_total + 1):
        if max_circles is not None and c > max_circles:
            break
        for q in range(0, max_total - c + 1):
            budget = max_total - q - c
            if c and budget < c * max(1, min_circle_degree):
                continue
            for t in range(q + 1):
                for a in range(q - t + 1):
                    for b in range(q - t - a + 1):
                        mid = q - t - a - b
                        if a + t > max_index or b + t > max_index:
                            continue
                        squares = [f"s{r}" for r in range(q)]
                        shared = squares[:t]
                        U = shared + squares[t: t + a]
                        V = shared + squares[t + a: t + a + b]
                        circles = [f"c{r}" for r in range(c)]
                        for labels in _label_matrices(q * c, budget):
                            edges = [(squares[r // c], circles[r % c], l) for r, l in enumerate(labels) if l] if c else []
                            shp = Shape.build(squares, circles, U, V, edges)
                            if proper and not is_proper(shp):
                                continue
                            if any(shp.degree(w) < min_circle_degree for w in circles):
                                continue
                            if even_square_total_degree and any(shp.total_degree(s) % 2 for s in squares):
                                continue
                            key = shape_hash(shp)
                            bucket = found.setdefault(key, [])
                            if any(isomorphic(shp, other) for other in bucket):
                                continue
                            bucket.append(shp)
                            out.append(shp)
    return out
