"""Maps between groups and the Floyd-metric comparisons they induce.

Covers the compatibility conditions on scaling functions for a quasi-isometric
(or alpha-isometric) map, the resulting Lipschitz constant for the Floyd
metrics, its empirical verification, shortcut pseudometrics on finite point
sets, and quasiconvexity scans of subgroups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .floyd import floyd_metric
from .functions import (
    DistortionFunction,
    Exponential,
    InversePolynomial,
    ScalingFunction,
    as_fraction,
    fraction_str,
    parse_distortion,
    poly_compose,
    poly_eval,
    poly_shift,
)
from .groups import CayleyBall, Element, Group, build_ball, inverse_symbol, load_group

DEFAULT_HORIZON = 1000
# stop evaluating a provably unbounded ratio once it passes this size
_WITNESS_SIZE = Fraction(2) ** 64


class MapVerificationError(ValueError):
    """A map does not satisfy its declared class on the checked pairs."""


@dataclass
class MapSpec:
    """A map between two groups.

    ``rule`` is ``subgroup-inclusion`` or ``homomorphism`` (with ``images``
    sending each source generator to a target word) or ``table`` (with
    ``table`` mapping source elements to target elements).  The declared
    class is ``c`` (c-quasi-isometric) or ``alpha`` (alpha-isometric).
    """

    source: Group
    target: Group
    rule: str
    images: Mapping[str, Sequence[str]] | None = None
    table: Mapping[Element, Element] | None = None
    c: Fraction | None = None
    alpha: DistortionFunction | None = None

    def __post_init__(self):
        if self.rule not in ("subgroup-inclusion", "homomorphism", "table"):
            raise ValueError(f"unknown map rule {self.rule!r}")
        if (self.c is None) == (self.alpha is None):
            raise ValueError("declare exactly one of c or alpha")
        if self.c is not None:
            self.c = as_fraction(self.c)
            if self.c < 1:
                raise ValueError("c must be >= 1")
        if self.rule == "table":
            if not self.table:
                raise ValueError("table rule needs a nonempty table")
            self.table = {self.source.element(k): self.target.element(v) for k, v in self.table.items()}
        else:
            images = dict(self.images or {})
            missing = [g for g in self.source.generators if g not in images]
            if missing:
                raise ValueError(f"no image for generators {missing}")
            self.images = {g: self.target.check_word(self.target.parse_word(w) if isinstance(w, str) else w)
                           for g, w in images.items()}

    def __call__(self, x) -> Element:
        x = self.source.element(x)
        if self.rule == "table":
            try:
                return self.table[x]
            except KeyError:
                raise KeyError(f"{x} is not in the map's table") from None
        word: list[str] = []
        for s in x.word:
            if s in self.images:
                word.extend(self.images[s])
            else:
                word.extend(inverse_symbol(t) for t in reversed(self.images[inverse_symbol(s)]))
        return self.target.normal_form(word)

    @property
    def basepoint_shift(self) -> int:
        """d(1, phi(1)) in the target."""
        return self(self.source.identity).length

    @property
    def alpha1(self) -> Fraction:
        return self.alpha(1) if self.alpha is not None else self.c

    def class_ok(self, dx: int, dy: int) -> bool:
        if self.c is not None:
            c = self.c
            return dx / c - c <= dy <= c * dx + c
        return dy <= self.alpha(dx) and dx <= self.alpha(dy)

    def verify_declared(self, ball: CayleyBall) -> int:
        """Check the declared class on every pair of ball vertices; returns the pair count."""
        if ball.group != self.source:
            raise ValueError("ball is not built in the map's source group")
        pts = [v for v in ball.vertices if self.rule != "table" or v in self.table]
        imgs = [self(v) for v in pts]
        count = 0
        for i, j in combinations(range(len(pts)), 2):
            dx = self.source.distance(pts[i], pts[j])
            dy = self.target.distance(imgs[i], imgs[j])
            count += 1
            if not self.class_ok(dx, dy):
                raise MapVerificationError(
                    f"declared class fails on ({pts[i]}, {pts[j]}): source distance {dx}, "
                    f"image distance {dy}"
                )
        return count

    def to_dict(self):
        d = {"source": self.source.to_dict(), "target": self.target.to_dict(), "rule": self.rule}
        if self.rule == "table":
            d["table"] = {str(k): str(v) for k, v in self.table.items()}
        else:
            d["images"] = {g: " ".join(w) or "1" for g, w in self.images.items()}
        if self.c is not None:
            d["c"] = fraction_str(self.c)
        else:
            d["alpha"] = self.alpha.to_dict()
        return d


def map_from_dict(doc: Mapping) -> MapSpec:
    def group(ref):
        if isinstance(ref, str):
            return load_group(ref)
        from .groups import group_from_dict

        return group_from_dict(ref)

    source, target = group(doc["source"]), group(doc["target"])
    alpha = doc.get("alpha")
    return MapSpec(
        source=source,
        target=target,
        rule=doc.get("rule", "homomorphism"),
        images=doc.get("images"),
        table=doc.get("table"),
        c=None if doc.get("c") is None else as_fraction(doc["c"]),
        alpha=None if alpha is None else parse_distortion(alpha),
    )


# -- compatibility conditions --------------------------------------------------------

@dataclass
class ConditionReport:
    verdict: str  # bounded | unbounded | undecided
    horizon: int
    horizon_sup: Fraction
    horizon_argmax: int
    D: Fraction | None  # sup over all n when bounded
    exact_sup: bool = False
    witness: tuple | None = None  # (n, ratio) showing growth when unbounded
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self):
        fs = lambda q: None if q is None else fraction_str(q)
        return {
            "verdict": self.verdict, "horizon": self.horizon,
            "horizon_sup": fs(self.horizon_sup), "horizon_argmax": self.horizon_argmax,
            "D": fs(self.D), "exact_sup": self.exact_sup,
            "witness": None if self.witness is None else [self.witness[0], fs(self.witness[1])],
            "note": self.note,
        }


def _inner_values(inner: Sequence[Fraction]):
    integral = all(as_fraction(c).denominator == 1 for c in inner)

    def g(n):
        v = poly_eval(inner, Fraction(n))
        return int(v) if v.denominator == 1 else math.ceil(v)

    return g, integral


def _ratio_condition(f1: ScalingFunction, f2: ScalingFunction, inner: Sequence, N: int) -> ConditionReport:
    inner = [as_fraction(c) for c in inner]
    while len(inner) > 1 and inner[-1] == 0:
        inner.pop()
    g, integral = _inner_values(inner)
    ratio = lambda n: f2(n) / f1(g(n))
    dg = len(inner) - 1
    verdict, D, exact, note = "undecided", None, False, ""
    limit_n = N

    sym = integral and f1.form in ("exponential", "inverse-polynomial") and \
        f2.form in ("exponential", "inverse-polynomial")
    if not integral:
        note = "non-integer inner values rounded up; no symbolic verdict"
    elif not sym:
        note = "no symbolic rule for these forms"
    elif isinstance(f2, InversePolynomial) and isinstance(f1, Exponential):
        verdict = "unbounded"
        note = "exponential denominator against polynomial numerator"
    elif isinstance(f2, Exponential) and isinstance(f1, Exponential):
        if dg >= 2:
            verdict = "unbounded"
            note = "superlinear exponent in the denominator"
        else:
            a, b = int(inner[1]), int(inner[0])
            if f2.lam <= f1.lam**a:
                verdict = "bounded"
                D = max(ratio(0), ratio(1))
                exact = True
                note = "ratio is nonincreasing in n >= 1"
            else:
                verdict = "unbounded"
                note = "geometric growth of the ratio"
    elif isinstance(f2, Exponential) and isinstance(f1, InversePolynomial):
        Q = poly_compose([Fraction(c) for c in f1.coefficients], inner)
        dq = len(Q) - 1
        # t(n) = lam^n Q(n) is nonincreasing once lam (1 + 1/n)^dq <= 1
        n_star = 1
        while f2.lam * (1 + Fraction(1, n_star)) ** dq > 1:
            n_star *= 2
        top = max(N, n_star)
        D = max(ratio(n) for n in range(0, top + 1))
        verdict, exact = "bounded", True
        note = f"ratio is nonincreasing beyond n = {n_star}"
    else:  # both inverse polynomial
        Q = poly_compose([Fraction(c) for c in f1.coefficients], inner)
        P2 = [Fraction(c) for c in f2.coefficients]
        if len(Q) > len(P2):
            verdict = "unbounded"
            note = "numerator degree exceeds denominator degree"
        else:
            verdict = "bounded"
            sigma = f2.scale / f1.scale
            head = max(ratio(n) for n in range(0, N + 1))
            lim = sigma * Q[-1] / P2[-1] if len(Q) == len(P2) else Fraction(0)
            cand = max(head, lim)
            diff = [cand / sigma * (P2[k] if k < len(P2) else 0) - (Q[k] if k < len(Q) else 0)
                    for k in range(len(P2))]
            if all(c >= 0 for c in poly_shift(diff, N + 1)):
                D, exact = cand, True
                note = "sup certified by a shifted-coefficient check"
            else:
                A = sum(q * Fraction(N + 1) ** (k - (len(Q) - 1)) for k, q in enumerate(Q))
                D = max(head, sigma * A / P2[-1])
                note = "crude tail bound beyond the horizon"

    best, arg, witness = None, 0, None
    for n in range(0, limit_n + 1):
        v = ratio(n)
        if best is None or v > best:
            best, arg = v, n
        if verdict == "unbounded" and v > _WITNESS_SIZE:
            witness = (n, v)
            break
    if verdict == "unbounded" and witness is None:
        witness = (arg, best)
    return ConditionReport(verdict, N, best, arg, D, exact, witness, note)


def check_condition_6(f1: ScalingFunction, f2: ScalingFunction, c, N: int = DEFAULT_HORIZON) -> ConditionReport:
    """sup_n f2(n)/f1(c n) (c n rounded up when not an integer)."""
    return _ratio_condition(f1, f2, [Fraction(0), as_fraction(c)], N)


def check_condition_13(f1: ScalingFunction, f2: ScalingFunction, alpha: DistortionFunction,
                       N: int = DEFAULT_HORIZON) -> ConditionReport:
    """sup_n f2(n)/f1(alpha(n))."""
    return _ratio_condition(f1, f2, list(alpha.coefficients), N)


def _int_exponent(x: Fraction) -> int:
    x = as_fraction(x)
    return x.numerator // x.denominator if x.denominator == 1 else math.ceil(x)


def lipschitz_constant(c, D, K, E, d1phi1) -> Fraction:
    """(2 c D K^n0 E^(c^2))^-1 with n0 = 2c + d(1, phi(1)).

    Non-integer exponents are rounded up; since K, E >= 1 this only shrinks the constant.
    """
    c, D, K, E = (as_fraction(x) for x in (c, D, K, E))
    for name, v in (("c", c), ("D", D), ("K", K), ("E", E)):
        if v <= 0:
            raise ValueError(f"{name} must be positive")
    n0 = _int_exponent(2 * c + d1phi1)
    return 1 / (2 * c * D * K**n0 * E ** _int_exponent(c * c))


def lipschitz_constant_alpha(alpha1, D, K, d1phi1) -> Fraction:
    """(2 alpha(1) K^n0 D)^-1 with n0 = 2 alpha(1) + d(1, phi(1))."""
    alpha1, D, K = (as_fraction(x) for x in (alpha1, D, K))
    n0 = _int_exponent(2 * alpha1 + d1phi1)
    return 1 / (2 * alpha1 * K**n0 * D)


@dataclass
class LipschitzReport:
    epsilon: Fraction
    pairs_checked: int
    min_certified_ratio: Fraction | None
    certified_witness: tuple | None
    min_upper_ratio: Fraction | None
    upper_witness: tuple | None
    undetermined: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.min_certified_ratio is None or self.min_certified_ratio >= self.epsilon

    def to_dict(self):
        fs = lambda q: None if q is None else fraction_str(q)
        ws = lambda w: None if w is None else [str(x) for x in w]
        return {
            "epsilon": fs(self.epsilon), "pairs_checked": self.pairs_checked,
            "min_certified_ratio": fs(self.min_certified_ratio),
            "certified_witness": ws(self.certified_witness),
            "min_upper_ratio": fs(self.min_upper_ratio), "upper_witness": ws(self.upper_witness),
            "undetermined": self.undetermined, "failures": self.failures, "passed": self.passed,
        }


def verify_lipschitz(phi: MapSpec, source_ball: CayleyBall, target_ball: CayleyBall,
                     f1: ScalingFunction, f2: ScalingFunction, epsilon,
                     pair_radius: int | None = None) -> LipschitzReport:
    """Check delta_f1(x, y) >= epsilon * delta_f2(phi x, phi y) on all pairs of
    source vertices within ``pair_radius`` of the source center.

    Each pair is certified with the source lower bound against the target
    upper bound.  A pair is a definite failure when even the source upper
    bound falls below epsilon times the target lower bound; pairs in between
    are counted as undetermined.
    """
    epsilon = as_fraction(epsilon)
    if pair_radius is None:
        pair_radius = source_ball.radius - 1
    if pair_radius >= source_ball.radius:
        raise ValueError("pair radius must be below the source ball radius")
    pts = [i for i, s in enumerate(source_ball.sphere_index) if s <= pair_radius]
    phi.verify_declared(build_ball(phi.source, pair_radius))
    imgs = []
    for i in pts:
        y = phi(source_ball.vertices[i])
        if y not in target_ball:
            raise ValueError(f"image {y} of {source_ball.vertices[i]} lies outside the target ball")
        imgs.append(target_ball.idx(y))
    m1, m2 = floyd_metric(source_ball, f1), floyd_metric(target_ball, f2)
    exit2 = m2.exit_costs()
    cert_min = up_min = None
    cert_w = up_w = None
    undetermined, failures, count = 0, [], 0
    for a, b in combinations(range(len(pts)), 2):
        i, j, y1, y2 = pts[a], pts[b], imgs[a], imgs[b]
        count += 1
        up2 = m2.upper(y1, y2)
        if up2 == 0:
            continue
        br = m1.bracket(i, j)
        cert = br.lower / up2
        upr = br.upper / up2
        pair = (source_ball.vertices[i], source_ball.vertices[j])
        if cert_min is None or cert < cert_min:
            cert_min, cert_w = cert, pair
        if up_min is None or upr < up_min:
            up_min, up_w = upr, pair
        if cert < epsilon:
            low2 = up2
            if target_ball.sphere_index[y1] < target_ball.radius and \
                    target_ball.sphere_index[y2] < target_ball.radius:
                low2 = min(up2, m2.frac(exit2[y1] + exit2[y2]))
            else:
                low2 = Fraction(0)
            if br.upper < epsilon * low2:
                failures.append({"pair": [str(p) for p in pair], "upper": fraction_str(br.upper),
                                 "target_lower": fraction_str(low2)})
            else:
                undetermined += 1
    return LipschitzReport(epsilon, count, cert_min, cert_w, up_min, up_w, undetermined, failures)


# -- shortcut pseudometric ------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceRelation:
    size: int
    classes: tuple

    def __post_init__(self):
        seen = set()
        for cls in self.classes:
            for p in cls:
                if not 0 <= p < self.size:
                    raise ValueError(f"point {p} outside 0..{self.size - 1}")
                if p in seen:
                    raise ValueError(f"point {p} lies in two classes")
                seen.add(p)
        if len(seen) != self.size:
            raise ValueError("classes do not cover the point set")

    @classmethod
    def from_labels(cls, labels: Sequence) -> "EquivalenceRelation":
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(len(labels), tuple(tuple(v) for v in groups.values()))

    @classmethod
    def trivial(cls, size: int) -> "EquivalenceRelation":
        return cls(size, tuple((i,) for i in range(size)))

    def label_of(self) -> list[int]:
        out = [0] * self.size
        for k, cls in enumerate(self.classes):
            for p in cls:
                out[p] = k
        return out


def shortcut_pseudometric(points: Sequence, delta, omega: EquivalenceRelation | Sequence) -> list[list[Fraction]]:
    """Largest pseudometric below ``delta`` that vanishes on ``omega``-classes.

    Equals the infimum over chains x = p_0 ~ q_0, p_1 ~ q_1, ... of
    sum delta(q_i, p_{i+1}); computed as shortest paths after adding
    zero-length edges inside classes.
    """
    n = len(points)
    if not isinstance(omega, EquivalenceRelation):
        omega = EquivalenceRelation.from_labels(omega)
    if omega.size != n:
        raise ValueError("equivalence relation and point set differ in size")
    D = [[as_fraction(x) for x in row] for row in delta]
    if len(D) != n or any(len(row) != n for row in D):
        raise ValueError("delta must be a square matrix over the points")
    for i in range(n):
        if D[i][i] != 0:
            raise ValueError(f"delta({i}, {i}) is not zero")
        for j in range(n):
            if D[i][j] < 0:
                raise ValueError(f"negative entry delta({i}, {j})")
            if D[i][j] != D[j][i]:
                raise ValueError(f"delta is not symmetric at ({i}, {j})")
    den = math.lcm(*(x.denominator for row in D for x in row)) if n else 1
    W = [[(x * den).numerator for x in row] for row in D]
    for cls in omega.classes:
        for p in cls:
            for q in cls:
                W[p][q] = 0
    for k in range(n):
        Wk = W[k]
        for i in range(n):
            wik = W[i][k]
            Wi = W[i]
            for j in range(n):
                v = wik + Wk[j]
                if v < Wi[j]:
                    Wi[j] = v
    return [[Fraction(x, den) for x in row] for row in W]


# -- quasiconvexity -------------------------------------------------------------------------

@dataclass
class QuasiconvexityReport:
    C: int
    subgroup_points: int
    pairs: int
    skipped_pairs: int
    geodesic_vertices: int
    max_deviation: int
    witness: dict | None
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        return {
            "C": self.C, "subgroup_points": self.subgroup_points, "pairs": self.pairs,
            "skipped_pairs": self.skipped_pairs, "geodesic_vertices": self.geodesic_vertices,
            "max_deviation": self.max_deviation, "witness": self.witness,
            "violations": self.violations, "passed": self.passed,
        }


def subgroup_vertices(ball: CayleyBall, inclusion: MapSpec, source_radius: int | None = None) -> list[int]:
    """Ball vertices that are images of source elements within ``source_radius``."""
    if ball.group != inclusion.target:
        raise ValueError("ball is not built in the inclusion's target group")
    src = build_ball(inclusion.source, ball.radius if source_radius is None else source_radius)
    found = set()
    for v in src.vertices:
        y = inclusion(v)
        if y in ball:
            found.add(ball.idx(y))
    return sorted(found)


def quasiconvexity_scan(ball: CayleyBall, subgroup: MapSpec, C: int = 0,
                        source_radius: int | None = None) -> QuasiconvexityReport:
    """Largest word distance from a vertex of a geodesic between two subgroup
    points (all geodesics inside the ball) to the subgroup points in the ball."""
    H = subgroup_vertices(ball, subgroup, source_radius)
    Hset = set(H)
    dev_cache: dict[int, tuple[int, int]] = {}

    def deviation(x):
        got = dev_cache.get(x)
        if got is None:
            if x in Hset:
                got = (0, x)
            else:
                got = min((ball.group_distance(x, h), h) for h in H)
            dev_cache[x] = got
        return got

    pairs = skipped = 0
    best, witness = -1, None
    for a_pos, a in enumerate(H):
        da = ball.bfs(a)
        for b in H[a_pos + 1:]:
            d = int(da[b])
            pairs += 1
            if not ball.ball_distance_certified(a, b, d):
                skipped += 1
                continue
            db = ball.bfs(b)
            for x in range(len(ball)):
                if da[x] + db[x] == d:
                    dev, h = deviation(x)
                    if dev > best:
                        best = dev
                        witness = {"endpoints": [str(ball.vertices[a]), str(ball.vertices[b])],
                                   "vertex": str(ball.vertices[x]), "nearest": str(ball.vertices[h]),
                                   "deviation": dev}
    on_geodesics = list(dev_cache)
    violations = sum(1 for x in on_geodesics if dev_cache[x][0] > C)
    return QuasiconvexityReport(C, len(H), pairs, skipped, len(on_geodesics), max(best, 0), witness,
                                violations)
