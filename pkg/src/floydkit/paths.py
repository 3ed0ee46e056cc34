"""Paths in Cayley balls: classification, geodesic enumeration, hulls,
far-point Floyd checks and ray Cauchy checks.

A path is a vertex sequence whose consecutive entries are equal or adjacent.
Classification is always verified over every index pair:

* geodesic:           d(g_i, g_j) == |i - j|
* c-quasigeodesic:    |i - j|/c - c <= d(g_i, g_j) <= c|i - j| + c     (c > 1)
* alpha-distorted:    d(g_i, g_j) <= alpha(|i - j|) and |i - j| <= alpha(d(g_i, g_j))

Distances are exact group distances (from normal forms) unless the caller
asks for in-ball BFS distances, in which case uncertified distances mark the
result as conditional.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .floyd import floyd_metric
from .functions import DistortionFunction, ScalingFunction, as_fraction, fraction_str
from .groups import CayleyBall, Element

DEFAULT_PATH_CAP = 100_000


class GeodesicCapError(RuntimeError):
    """Enumeration aborted; ``count`` is the exact number of paths (a lower
    bound when ``exact_count`` is False)."""

    def __init__(self, message, count: int, exact_count: bool = True):
        super().__init__(message)
        self.count = count
        self.exact_count = exact_count


@dataclass(frozen=True)
class Classification:
    kind: str  # geodesic | quasigeodesic | alpha-distorted | plain
    geodesic: bool
    quasigeodesic: bool | None = None
    alpha_distorted: bool | None = None
    c: Fraction | None = None
    alpha: DistortionFunction | None = None
    exact: bool = True

    def to_dict(self):
        d = {"kind": self.kind, "geodesic": self.geodesic, "exact": self.exact}
        if self.c is not None:
            d["c"] = fraction_str(self.c)
            d["quasigeodesic"] = self.quasigeodesic
        if self.alpha is not None:
            d["alpha"] = str(self.alpha)
            d["alpha_distorted"] = self.alpha_distorted
        return d


@dataclass
class PathWitness:
    vertices: tuple
    start: int = 0
    classification: Classification | None = None
    floyd_length: Fraction | None = None

    @property
    def index_interval(self) -> tuple[int, int]:
        return (self.start, self.start + len(self.vertices) - 1)

    def __len__(self):
        return len(self.vertices)

    def to_dict(self):
        d = {"vertices": [str(v) for v in self.vertices], "interval": list(self.index_interval)}
        if self.classification is not None:
            d["classification"] = self.classification.to_dict()
        if self.floyd_length is not None:
            d["floyd_length"] = fraction_str(self.floyd_length)
        return d


# -- pairwise conditions -------------------------------------------------------

def qg_ok(gap: int, d: int, c: Fraction) -> bool:
    return gap / c - c <= d <= c * gap + c


def alpha_ok(gap: int, d: int, alpha: DistortionFunction) -> bool:
    return d <= alpha(gap) and gap <= alpha(d)


def _validate_steps(ball: CayleyBall, idxs: Sequence[int]):
    for a, b in zip(idxs, idxs[1:]):
        if a != b and not ball.is_adjacent(a, b):
            raise ValueError(
                f"consecutive path vertices {ball.vertices[a]} and {ball.vertices[b]} are not adjacent"
            )


def _distance_fn(ball: CayleyBall, use_ball_distances: bool):
    if not use_ball_distances:
        return lambda i, j: (ball.group_distance(i, j), True)

    def fn(i, j):
        wd = ball.word_distance(i, j)
        return wd.distance, wd.exact

    return fn


def classify_path(ball: CayleyBall, path: Iterable, c=None, alpha: DistortionFunction | None = None,
                  use_ball_distances: bool = False) -> Classification:
    idxs = [ball.idx(p) for p in path]
    _validate_steps(ball, idxs)
    c = None if c is None else as_fraction(c)
    if c is not None and c < 1:
        raise ValueError("quasigeodesic constant must be >= 1")
    dist = _distance_fn(ball, use_ball_distances)
    geo, qg, al, exact = True, c is not None, alpha is not None, True
    n = len(idxs)
    for i in range(n):
        for j in range(i + 1, n):
            d, ex = dist(idxs[i], idxs[j])
            exact &= ex
            gap = j - i
            if d != gap:
                geo = False
            if qg and not qg_ok(gap, d, c):
                qg = False
            if al and not alpha_ok(gap, d, alpha):
                al = False
    if geo:
        kind = "geodesic"
        qg = True if c is not None else None
        al = True if alpha is not None else None
    elif qg:
        kind = "quasigeodesic"
    elif al:
        kind = "alpha-distorted"
    else:
        kind = "plain"
    return Classification(
        kind=kind,
        geodesic=geo,
        quasigeodesic=qg if c is not None else None,
        alpha_distorted=al if alpha is not None else None,
        c=c,
        alpha=alpha,
        exact=exact,
    )


def make_witness(ball: CayleyBall, idxs: Sequence[int], f: ScalingFunction | None = None,
                 classification: Classification | None = None) -> PathWitness:
    length = floyd_metric(ball, f).path_length(list(idxs)) if f is not None else None
    return PathWitness(tuple(ball.vertices[i] for i in idxs), 0, classification, length)


# -- geodesics -----------------------------------------------------------------

def _require_exact(ball: CayleyBall, i: int, j: int) -> int:
    d = int(ball.bfs(j)[i])
    if not ball.ball_distance_certified(i, j, d):
        raise ValueError(
            f"no geodesic from {ball.vertices[i]} to {ball.vertices[j]} stays inside the "
            f"radius-{ball.radius} ball (ball distance {d} > group distance)"
        )
    return d


def count_geodesics(ball: CayleyBall, a, b) -> int:
    i, j = ball.idx(a), ball.idx(b)
    _require_exact(ball, i, j)
    db = ball.bfs(j)
    order = sorted((v for v in range(len(ball)) if db[v] <= db[i]), key=lambda v: db[v])
    ways = {j: 1}
    for v in order:
        if v == j:
            continue
        ways[v] = sum(ways.get(w, 0) for w in ball.neighbors[v] if db[w] == db[v] - 1)
    return ways.get(i, 0)


def iter_geodesics(ball: CayleyBall, i: int, j: int):
    """All geodesic index sequences from i to j inside the ball, lexicographic."""
    db = ball.bfs(j)
    path = [i]

    def rec(u):
        if u == j:
            yield list(path)
            return
        for w in ball.neighbors[u]:
            if db[w] == db[u] - 1:
                path.append(w)
                yield from rec(w)
                path.pop()

    yield from rec(i)


def enumerate_geodesics(ball: CayleyBall, a, b, cap: int = DEFAULT_PATH_CAP,
                        f: ScalingFunction | None = None) -> list[PathWitness]:
    i, j = ball.idx(a), ball.idx(b)
    _require_exact(ball, i, j)
    out = []
    geo = Classification(kind="geodesic", geodesic=True)
    for p in iter_geodesics(ball, i, j):
        if len(out) >= cap:
            total = count_geodesics(ball, i, j)
            raise GeodesicCapError(
                f"{total} geodesics from {ball.vertices[i]} to {ball.vertices[j]} exceed the cap {cap}",
                total,
            )
        out.append(make_witness(ball, p, f, geo))
    return out


def lex_least_geodesic(ball: CayleyBall, i: int, j: int) -> list[int]:
    return next(iter_geodesics(ball, i, j))


# -- quasigeodesic / alpha-distorted search -----------------------------------------

class _PathRule:
    """Incremental validity test for extending a path by one vertex."""

    def __init__(self, ball: CayleyBall, c=None, alpha=None):
        self.ball = ball
        self.c = None if c is None else as_fraction(c)
        self.alpha = alpha
        if self.alpha is None and (self.c is None or self.c == 1):
            self.mode = "geodesic"
        elif self.alpha is None:
            self.mode = "quasigeodesic"
        else:
            self.mode = "alpha"

    def max_length(self, d: int) -> int:
        """Upper bound for |I| - 1 of a valid path between points at distance d."""
        if self.mode == "geodesic":
            return d
        if self.mode == "quasigeodesic":
            return int(self.c * (d + self.c))
        return int(self.alpha(d))

    def pair_ok(self, gap: int, d: int) -> bool:
        if self.mode == "geodesic":
            return d == gap
        if self.mode == "quasigeodesic":
            return qg_ok(gap, d, self.c)
        return alpha_ok(gap, d, self.alpha)

    def can_extend(self, path: Sequence[int], v: int) -> bool:
        n = len(path)
        gd = self.ball.group_distance
        for k in range(n - 1, -1, -1):
            if not self.pair_ok(n - k, gd(path[k], v)):
                return False
        return True

    def parameter(self) -> dict:
        if self.mode == "geodesic":
            return {"c": "1/1"}
        if self.mode == "quasigeodesic":
            return {"c": fraction_str(self.c)}
        return {"alpha": str(self.alpha)}

    def classification(self) -> Classification:
        if self.mode == "geodesic":
            return Classification(kind="geodesic", geodesic=True)
        if self.mode == "quasigeodesic":
            return Classification(kind="quasigeodesic", geodesic=False, quasigeodesic=True, c=self.c)
        return Classification(kind="alpha-distorted", geodesic=False, alpha_distorted=True,
                              alpha=self.alpha)


def iter_valid_paths(ball: CayleyBall, i: int, j: int, rule: _PathRule, node_cap: int):
    """Stutter-free valid paths from i to j inside the ball (depth-first, lexicographic)."""
    if rule.mode == "geodesic":
        _require_exact(ball, i, j)
        yield from iter_geodesics(ball, i, j)
        return
    limit = rule.max_length(ball.group_distance(i, j))
    gd = ball.group_distance
    path = [i]
    nodes = 0

    def rec(u):
        nonlocal nodes
        nodes += 1
        if nodes > node_cap:
            raise GeodesicCapError(f"path search exceeded {node_cap} nodes", nodes, False)
        if u == j:
            yield list(path)
        remaining = limit - (len(path) - 1)
        if remaining <= 0:
            return
        for w in ball.neighbors[u]:
            if gd(w, j) > remaining - 1:
                continue
            if rule.can_extend(path, w):
                path.append(w)
                yield from rec(w)
                path.pop()

    yield from rec(i)


@dataclass
class Hull:
    base_set: tuple
    parameter: dict
    members: tuple
    witness_paths: list = field(default_factory=list)
    mode: str = "exhaustive"
    path_count: int = 0
    samples: int | None = None
    seed: int | None = None

    def to_dict(self):
        d = {
            "base_set": [str(m) for m in self.base_set],
            "parameter": self.parameter,
            "mode": self.mode,
            "members": [str(m) for m in self.members],
            "path_count": self.path_count,
            "witness_paths": [w.to_dict() for w in self.witness_paths],
        }
        if self.mode == "sampled":
            d["samples"] = self.samples
            d["seed"] = self.seed
        return d


def _sorted_members(ball, idxs):
    return tuple(ball.vertices[i] for i in sorted(idxs))


def hull(ball: CayleyBall, M: Iterable, c=None, alpha: DistortionFunction | None = None,
         mode: str = "exhaustive", samples: int = 1000, seed: int = 0,
         cap: int = DEFAULT_PATH_CAP, max_length: int | None = None) -> Hull:
    """M together with every valid path (inside the ball) joining two points of M.

    Exhaustive mode enumerates all stutter-free paths; dropping repeated
    consecutive vertices never invalidates a path, so this loses no members.
    Sampled mode runs seeded random walks and returns a lower approximation.
    """
    base = sorted({ball.idx(m) for m in M})
    rule = _PathRule(ball, c, alpha)
    members = set(base)
    covered: dict[int, list[int]] = {m: [m] for m in base}
    count = 0
    if mode == "exhaustive":
        for a_pos, a in enumerate(base):
            for b in base[a_pos + 1:]:
                for p in iter_valid_paths(ball, a, b, rule, node_cap=cap * 50):
                    count += 1
                    if count > cap:
                        raise GeodesicCapError(f"hull path count exceeds the cap {cap}", count, False)
                    for v in p:
                        if v not in covered:
                            covered[v] = p
                            members.add(v)
    elif mode == "sampled":
        walks = sample_paths(ball, rule, base, samples, seed,
                             max_length or rule.max_length(2 * ball.radius), targets=set(base))
        for p in walks:
            count += 1
            for v in p:
                if v not in covered:
                    covered[v] = p
                    members.add(v)
    else:
        raise ValueError(f"unknown hull mode {mode!r}")
    witnesses = []
    seen_paths = set()
    for v in sorted(members):
        p = tuple(covered[v])
        if p not in seen_paths:
            seen_paths.add(p)
            witnesses.append(make_witness(ball, p, None, rule.classification()))
    return Hull(
        base_set=_sorted_members(ball, base),
        parameter=rule.parameter(),
        members=_sorted_members(ball, members),
        witness_paths=witnesses,
        mode=mode,
        path_count=count,
        samples=samples if mode == "sampled" else None,
        seed=seed if mode == "sampled" else None,
    )


def sample_paths(ball: CayleyBall, rule: _PathRule, starts: Sequence[int], samples: int, seed: int,
                 max_length: int, targets: set | None = None, min_level: int | None = None):
    """Seeded random walks that stay valid for ``rule``.

    With ``targets`` the result lists every prefix of every walk that ends in
    ``targets`` (and has positive length); otherwise the full walks.
    ``min_level`` restricts walks to vertices at distance > min_level from the center.
    """
    rng = random.Random(seed)
    level = ball.sphere_index
    out = []
    for _ in range(samples):
        start = starts[rng.randrange(len(starts))]
        target_len = rng.randint(1, max(1, max_length))
        path = [start]
        while len(path) - 1 < target_len:
            cands = [w for w in ball.neighbors[path[-1]]
                     if (min_level is None or level[w] > min_level) and rule.can_extend(path, w)]
            if not cands:
                break
            path.append(cands[rng.randrange(len(cands))])
            if targets is not None and path[-1] in targets:
                out.append(list(path))
        if targets is None and len(path) > 1:
            out.append(path)
    return out


# -- far points of hulls -------------------------------------------------------------

def effective_distortion(c=None, alpha: DistortionFunction | None = None) -> DistortionFunction:
    """A distortion function alpha with |i-j| <= alpha(d) and d <= alpha(|i-j|) for the path class."""
    from .functions import distortion, identity_distortion

    if alpha is not None:
        return alpha
    c = Fraction(1) if c is None else as_fraction(c)
    if c == 1:
        return identity_distortion()
    # |i-j| <= c(d + c) = c d + c^2, and d <= c|i-j| + c <= c|i-j| + c^2
    return distortion([c * c, c])


@dataclass
class FarPointReport:
    epsilon: Fraction
    r: int
    r1: Fraction
    parameter: dict
    paths_checked: int
    qualifying_paths: int
    max_path_length: Fraction | None
    far_points: int
    max_far_distance: Fraction | None
    witness: PathWitness | None
    violations: list
    r1_violations: int

    @property
    def inconclusive(self) -> bool:
        return self.qualifying_paths == 0 and self.far_points == 0

    @property
    def passed(self) -> bool:
        return not self.violations and self.r1_violations == 0

    def to_dict(self):
        fs = lambda q: None if q is None else fraction_str(q)
        return {
            "epsilon": fs(self.epsilon), "r": self.r, "r1": fs(self.r1),
            "parameter": self.parameter, "paths_checked": self.paths_checked,
            "qualifying_paths": self.qualifying_paths,
            "max_path_length": fs(self.max_path_length), "far_points": self.far_points,
            "max_far_distance": fs(self.max_far_distance),
            "witness": self.witness.to_dict() if self.witness else None,
            "violations": self.violations, "r1_violations": self.r1_violations,
            "inconclusive": self.inconclusive, "passed": self.passed,
        }


def far_point_floyd_check(ball: CayleyBall, f: ScalingFunction, M: Iterable, c=None,
                          alpha: DistortionFunction | None = None, epsilon=Fraction(1, 10),
                          mode: str = "exhaustive", samples: int = 1000, seed: int = 0,
                          cap: int = DEFAULT_PATH_CAP) -> FarPointReport:
    """Far parts of hull paths are Floyd-short, and far hull points are Floyd-close to M.

    The radius is taken for epsilon/2: the Karlsson bound controls each side
    of a path's nearest point to the basepoint separately, so the whole path
    stays below epsilon.
    """
    from .karlsson import karlsson_radius

    epsilon = as_fraction(epsilon)
    rule = _PathRule(ball, c, alpha)
    eff = effective_distortion(c, alpha)
    r = karlsson_radius(f, eff, epsilon / 2)
    paper_r1 = r + (rule.c or 1) * r + (rule.c or 1) / 2 if rule.mode != "alpha" else Fraction(0)
    r1 = max(Fraction(paper_r1), r + eff(2 * r) / 2)
    base = sorted({ball.idx(m) for m in M})
    metric = floyd_metric(ball, f)
    level = ball.sphere_index

    if mode == "exhaustive":
        paths = []
        for a_pos, a in enumerate(base):
            for b in base[a_pos + 1:]:
                paths.extend(iter_valid_paths(ball, a, b, rule, node_cap=cap * 50))
                if len(paths) > cap:
                    raise GeodesicCapError(f"path count exceeds the cap {cap}", len(paths), False)
    else:
        paths = sample_paths(ball, rule, base, samples, seed,
                             rule.max_length(2 * ball.radius), targets=set(base))

    qualifying = far = r1_bad = 0
    max_len = max_far = None
    witness = None
    violations = []
    base_set = set(base)
    for p in paths:
        L = metric.path_length(p)
        if min(level[v] for v in p) > r:
            qualifying += 1
            if max_len is None or L > max_len:
                max_len, witness = L, p
            if L >= epsilon:
                violations.append({"kind": "path", "path": [str(ball.vertices[v]) for v in p],
                                   "floyd_length": fraction_str(L)})
        for t, x in enumerate(p):
            if level[x] <= r1 or x in base_set:
                continue
            far += 1
            halves = [p[:t + 1], p[t:]]
            good = [h for h in halves if min(level[v] for v in h) > r]
            if not good:
                r1_bad += 1
                continue
            half = min(good, key=metric.path_length)
            hl = metric.path_length(half)
            dist = min(metric.upper(x, m) for m in base)
            if max_far is None or dist > max_far:
                max_far = dist
            if hl >= epsilon or dist >= epsilon:
                violations.append({"kind": "far-point", "point": str(ball.vertices[x]),
                                   "half_length": fraction_str(hl), "distance": fraction_str(dist)})
    return FarPointReport(
        epsilon=epsilon, r=r, r1=r1, parameter=rule.parameter(), paths_checked=len(paths),
        qualifying_paths=qualifying, max_path_length=max_len, far_points=far,
        max_far_distance=max_far,
        witness=make_witness(ball, witness, f) if witness else None,
        violations=violations, r1_violations=r1_bad,
    )


# -- rays ------------------------------------------------------------------------------

@dataclass
class RayReport:
    classification: Classification
    profile: list  # per n: (n, max_m delta_upper, floyd tail length, bound)
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "classification": self.classification.to_dict(),
            "profile": [
                {"n": n, "max_delta": fraction_str(a), "tail_length": fraction_str(b),
                 "bound": fraction_str(c)}
                for n, a, b, c in self.profile
            ],
            "violations": self.violations,
            "passed": self.passed,
        }


def ray_cauchy_check(ball: CayleyBall, f: ScalingFunction, ray_prefix: Iterable, c=None,
                     alpha: DistortionFunction | None = None) -> RayReport:
    """delta(ray(n), ray(m)) <= L(ray[n..m]) <= tail bound, for all n <= m."""
    from .karlsson import path_bound

    idxs = [ball.idx(p) for p in ray_prefix]
    if not idxs or ball.vertices[idxs[0]] != ball.center:
        raise ValueError("a ray prefix must start at the basepoint")
    cls = classify_path(ball, idxs, c=c, alpha=alpha)
    valid = cls.geodesic or cls.quasigeodesic or cls.alpha_distorted
    if not valid:
        raise ValueError(f"ray prefix is not valid for the requested class ({cls.kind})")
    metric = floyd_metric(ball, f)
    eff = effective_distortion(c, alpha)
    level = ball.sphere_index
    profile, violations = [], []
    n_len = len(idxs)
    for n in range(n_len):
        best_delta = Fraction(0)
        tail_len = metric.path_length(idxs[n:])
        worst_bound = Fraction(0)
        for m in range(n, n_len):
            seg = idxs[n:m + 1]
            L = metric.path_length(seg)
            delta = metric.upper(idxs[n], idxs[m])
            if cls.geodesic:
                bound = f.tail_bound(n)
            else:
                levels = [level[v] for v in seg]
                bound = path_bound(levels, f, eff, max(min(levels) - 1, 0))
            worst_bound = max(worst_bound, bound)
            best_delta = max(best_delta, delta)
            if not (delta <= L <= bound):
                violations.append({"n": n, "m": m, "delta": fraction_str(delta),
                                   "length": fraction_str(L), "bound": fraction_str(bound)})
        profile.append((n, best_delta, tail_len, worst_bound))
    return RayReport(cls, profile, violations)
