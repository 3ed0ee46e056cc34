"""Floyd lengths and certified Floyd distances on finite Cayley balls.

An edge whose nearer endpoint lies at word distance n from the basepoint has
Floyd length f(n); the Floyd distance is the induced shortest-path metric.
Inside a finite ball we get an upper bound (shortest path within the ball)
and a lower bound: any path that leaves the ball pays, on each side, the
cheapest route to the outermost sphere plus one exiting edge.

All distances are computed on integers, scaled by a common denominator of
the edge lengths in use, and handed back as exact fractions.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .functions import ScalingFunction, fraction_str
from .groups import CayleyBall, Element

DEFAULT_TOLERANCE = Fraction(1, 10**6)


@dataclass(frozen=True)
class FloydBracket:
    lower: Fraction
    upper: Fraction
    ball_radius: int
    converged: bool

    @property
    def gap(self) -> Fraction:
        return self.upper - self.lower

    def to_dict(self):
        return {
            "lower": fraction_str(self.lower),
            "upper": fraction_str(self.upper),
            "ball_radius": self.ball_radius,
            "converged": self.converged,
        }


def _dijkstra(adj, sources: dict[int, int]) -> list:
    dist: list = [None] * len(adj)
    heap = [(d, s) for s, d in sources.items()]
    heapq.heapify(heap)
    best = dict(sources)
    while heap:
        d, u = heapq.heappop(heap)
        if dist[u] is not None:
            continue
        dist[u] = d
        for v, w in adj[u]:
            nd = d + w
            if dist[v] is None and (v not in best or nd < best[v]):
                best[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class FloydMetric:
    """The Floyd metric of ``f`` at ``basepoint`` restricted to a ball."""

    def __init__(self, ball: CayleyBall, f: ScalingFunction, basepoint=None):
        self.ball = ball
        self.f = f
        group = ball.group
        if basepoint is None or ball._coerce(basepoint) == ball.center:
            self.basepoint = ball.center
            self.level = list(ball.sphere_index)
        else:
            self.basepoint = ball._coerce(basepoint)
            self.level = [group.distance(self.basepoint, v) for v in ball.vertices]
        levels = set(self.level)
        self._flen = {n: f(n) for n in range(0, max(levels) + 1)}
        self.denominator = reduce(math.lcm, (q.denominator for q in self._flen.values()), 1)
        scaled = {n: (q * self.denominator).numerator for n, q in self._flen.items()}
        self._scaled = scaled
        lvl = self.level
        self.adj = [
            [(j, scaled[min(lvl[i], lvl[j])]) for j in ball.neighbors[i]]
            for i in range(len(ball))
        ]
        self._from: dict[int, list] = {}
        self._exit = None

    # -- scalar queries ----------------------------------------------------

    def frac(self, scaled: int) -> Fraction:
        return Fraction(scaled, self.denominator)

    def edge_length(self, i: int, j: int) -> Fraction:
        if not self.ball.is_adjacent(i, j):
            raise ValueError(f"{self.ball.vertices[i]} and {self.ball.vertices[j]} are not adjacent")
        return self._flen[min(self.level[i], self.level[j])]

    def path_length(self, path: Sequence[int]) -> Fraction:
        total = Fraction(0)
        for a, b in zip(path, path[1:]):
            if a != b:
                total += self.edge_length(a, b)
        return total

    def distances_from(self, i: int) -> list:
        got = self._from.get(i)
        if got is None:
            got = _dijkstra(self.adj, {i: 0})
            self._from[i] = got
        return got

    def upper(self, i: int, j: int) -> Fraction:
        return self.frac(self.distances_from(i)[j])

    def exit_costs(self) -> list:
        """Scaled cost, from each vertex, of reaching the outermost sphere and
        crossing one edge out of the ball."""
        if self._exit is None:
            seeds = {b: self._scaled[self.level[b]] for b in self.ball.boundary}
            self._exit = _dijkstra(self.adj, seeds)
        return self._exit

    def bracket(self, i: int, j: int, tolerance=DEFAULT_TOLERANCE) -> FloydBracket:
        ball = self.ball
        for k in (i, j):
            if ball.sphere_index[k] >= ball.radius:
                raise ValueError(
                    f"{ball.vertices[k]} lies on the outermost sphere of the radius-"
                    f"{ball.radius} ball; no lower bound is available"
                )
        up = self.distances_from(i)[j]
        ex = self.exit_costs()
        low = min(up, ex[i] + ex[j])
        upper, lower = self.frac(up), self.frac(low)
        return FloydBracket(lower, upper, ball.radius, upper - lower <= tolerance * upper)

    def shortest_path(self, i: int, j: int) -> list[int]:
        """Lexicographically least shortest path from i to j (by vertex index)."""
        dj = self.distances_from(j)
        path = [i]
        cur = i
        while cur != j:
            for v, w in self.adj[cur]:  # neighbors are sorted by index
                if dj[v] is not None and dj[v] + w == dj[cur]:
                    cur = v
                    break
            path.append(cur)
        return path

    def scaled_matrix(self) -> list[list[int]]:
        return [self.distances_from(i) for i in range(len(self.ball))]

    def matrix(self) -> list[list[Fraction]]:
        return [[self.frac(x) for x in row] for row in self.scaled_matrix()]


def floyd_metric(ball: CayleyBall, f: ScalingFunction, basepoint=None) -> FloydMetric:
    bp = None if basepoint is None else ball._coerce(basepoint)
    if bp == ball.center:
        bp = None
    key = ("floyd", f, bp)
    m = ball._metrics.get(key)
    if m is None:
        m = FloydMetric(ball, f, bp)
        ball._metrics[key] = m
    return m


def edge_floyd_length(ball: CayleyBall, f: ScalingFunction, edge) -> Fraction:
    x, y = edge
    return floyd_metric(ball, f).edge_length(ball.idx(x), ball.idx(y))


def path_floyd_length(ball: CayleyBall, f: ScalingFunction, path, basepoint=None) -> Fraction:
    idxs = [ball.idx(p) for p in path]
    return floyd_metric(ball, f, basepoint).path_length(idxs)


def floyd_distance(ball: CayleyBall, f: ScalingFunction, a, b, tolerance=DEFAULT_TOLERANCE,
                   basepoint=None) -> FloydBracket:
    i, j = ball.idx(a), ball.idx(b)
    return floyd_metric(ball, f, basepoint).bracket(i, j, tolerance)


# -- metric-level checks --------------------------------------------------------

def _as_int_array(rows: list[list[int]]):
    biggest = max((max(r) for r in rows), default=0)
    if biggest < 2**61:
        return np.array(rows, dtype=np.int64)
    return np.array(rows, dtype=object)


def metric_axiom_violations(scaled: list[list[int]]) -> dict:
    """Exact check of symmetry, identity of indiscernibles and the triangle inequality."""
    D = _as_int_array(scaled)
    n = D.shape[0]
    asym = int(np.count_nonzero(D != D.T))
    diag = int(np.count_nonzero(np.diagonal(D) != 0))
    offdiag_zero = int(np.count_nonzero(D == 0)) - n
    tri = 0
    for k in range(n):
        via = D[:, k][:, None] + D[k, :][None, :]
        tri += int(np.count_nonzero(D > via))
    return {"asymmetric": asym, "nonzero_diagonal": diag, "zero_offdiagonal": offdiag_zero,
            "triangle": tri}


@dataclass
class BasepointReport:
    v1: Element
    v2: Element
    bound: Fraction
    max_ratio: Fraction
    witness: tuple | None
    pairs_checked: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        return {
            "v1": str(self.v1), "v2": str(self.v2),
            "bound": fraction_str(self.bound), "max_ratio": fraction_str(self.max_ratio),
            "witness": [str(w) for w in self.witness] if self.witness else None,
            "pairs_checked": self.pairs_checked, "violations": self.violations,
            "passed": self.passed,
        }


def basepoint_change_check(ball: CayleyBall, f: ScalingFunction, v1, v2) -> BasepointReport:
    """Compare delta_{v1} with K^{d(v1,v2)} * delta_{v2} on every vertex pair."""
    e1, e2 = ball._coerce(v1), ball._coerce(v2)
    K = f.ratio_constant()
    bound = K ** ball.group.distance(e1, e2)
    m1, m2 = floyd_metric(ball, f, e1), floyd_metric(ball, f, e2)
    n = len(ball)
    best, witness, bad, count = Fraction(0), None, 0, 0
    for i in range(n):
        r1, r2 = m1.distances_from(i), m2.distances_from(i)
        for j in range(i + 1, n):
            ratio = Fraction(r1[j] * m2.denominator, r2[j] * m1.denominator)
            count += 1
            if ratio > best:
                best, witness = ratio, (ball.vertices[i], ball.vertices[j])
            if ratio > bound:
                bad += 1
    if n == 1:
        best = Fraction(1)
    return BasepointReport(e1, e2, bound, best, witness, count, bad)


class InconsistencyError(AssertionError):
    """A metric comparison that must hold failed; the implementation is wrong."""


@dataclass
class ComparisonReport:
    pairs_checked: int
    equal_pairs: int
    max_ratio: Fraction
    witness: tuple | None

    @property
    def equal_everywhere(self) -> bool:
        return self.equal_pairs == self.pairs_checked

    def to_dict(self):
        return {"pairs_checked": self.pairs_checked, "equal_pairs": self.equal_pairs,
                "max_ratio": fraction_str(self.max_ratio),
                "witness": [str(w) for w in self.witness] if self.witness else None}


def metric_comparison_check(ball: CayleyBall, f_small: ScalingFunction,
                            f_big: ScalingFunction) -> ComparisonReport:
    for n in range(ball.radius + 1):
        if f_small(n) > f_big(n):
            raise ValueError(
                f"precondition fails: f_small({n}) = {f_small(n)} > f_big({n}) = {f_big(n)}"
            )
    ms, mb = floyd_metric(ball, f_small), floyd_metric(ball, f_big)
    n = len(ball)
    count = equal = 0
    best, witness = Fraction(0), None
    for i in range(n):
        rs, rb = ms.distances_from(i), mb.distances_from(i)
        for j in range(i + 1, n):
            small, big = ms.frac(rs[j]), mb.frac(rb[j])
            count += 1
            if small > big:
                raise InconsistencyError(
                    f"delta_small({ball.vertices[i]}, {ball.vertices[j]}) = {small} exceeds "
                    f"delta_big = {big}"
                )
            equal += small == big
            if small / big > best:
                best, witness = small / big, (ball.vertices[i], ball.vertices[j])
    return ComparisonReport(count, equal, best, witness)
