"""Karlsson radii, admissible (f, alpha) pairs and empirical path scans.

The series of interest is sum_{i>=r} t_i with t_i = alpha(2i+1) f(i).  A path
avoiding the ball of radius r whose nearest point to the basepoint is an
endpoint, and whose far endpoint sits at level k, has Floyd length at most

    sum_{i=r}^{k} alpha(2i+1) f(i) + alpha(2k) f(k).

For a path whose nearest point is interior, the two sides are bounded
separately and added.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .floyd import floyd_metric
from .functions import (
    DistortionFunction,
    Exponential,
    InversePolynomial,
    ScalingFunction,
    Table,
    as_fraction,
    fraction_str,
    identity_distortion,
    poly_compose,
)
from .groups import CayleyBall

# partial sums are rounded up to multiples of 2**-_PRECISION (a rigorous over-estimate)
_PRECISION = 128
_START_N = 16
_MAX_N = 1 << 22
# longest exact stretch used to sharpen a radius certificate
_CERT_N = 1 << 17


class DomainError(ValueError):
    """The (f, alpha) pair is not admissible."""


def _series_poly(alpha: DistortionFunction) -> list:
    """Coefficients (ascending) of i -> alpha(2i + 1)."""
    return poly_compose(alpha.coefficients, [Fraction(1), Fraction(2)])


def term(f: ScalingFunction, alpha: DistortionFunction, i: int) -> Fraction:
    return alpha(2 * i + 1) * f(i)


def _closed_tail(f: ScalingFunction):
    """(closed-form function governing large n, first index where it applies)."""
    if isinstance(f, Table):
        inner, start = _closed_tail(f.tail)
        return inner, max(start, len(f.prefix) + 1)
    return f, 1


def tail_majorant(f: ScalingFunction, alpha: DistortionFunction, N: int) -> Fraction | None:
    """A rigorous upper bound for sum_{i>=N} alpha(2i+1) f(i), or None if this
    N is too small for the estimate (or the series diverges)."""
    closed, start = _closed_tail(f)
    if N < start:
        head = sum((term(f, alpha, i) for i in range(N, start)), Fraction(0))
        rest = tail_majorant(f, alpha, start)
        return None if rest is None else head + rest
    p = _series_poly(alpha)
    d = len(p) - 1
    if isinstance(closed, Exponential):
        # t_{i+1}/t_i <= lam (1 + 1/i)^d <= lam (1 + 1/N)^d
        q = closed.lam * (1 + Fraction(1, N)) ** d
        if q >= 1:
            return None
        return term(f, alpha, N) / (1 - q)
    if isinstance(closed, InversePolynomial):
        sigma = closed.degree - d
        if sigma < 2:
            return None
        lead = closed.coefficients[-1]
        # alpha(2i+1) <= A i^d and P(i) >= lead i^e for i >= N
        A = sum(c * Fraction(N) ** (k - d) for k, c in enumerate(p))
        zeta = Fraction(1, N**sigma) + Fraction(1, (sigma - 1) * N ** (sigma - 1))
        return closed.scale * A / lead * zeta
    return None


@dataclass
class AdmissiblePair:
    f: ScalingFunction
    alpha: DistortionFunction
    verdict: str  # admissible | not-admissible | undecided
    reason: str = ""

    @property
    def admissible(self) -> bool:
        return self.verdict == "admissible"

    def term(self, i: int) -> Fraction:
        return term(self.f, self.alpha, i)

    def partial_sum(self, start: int, stop: int) -> Fraction:
        return sum((self.term(i) for i in range(start, stop)), Fraction(0))

    def tail(self, r: int, N: int | None = None) -> Fraction | None:
        """Upper bound for sum_{i>=r} t_i: exact terms up to N, majorant beyond."""
        N = max(r, N or _START_N)
        while N <= _MAX_N:
            M = tail_majorant(self.f, self.alpha, N)
            if M is not None:
                return self.partial_sum(r, N) + M
            N *= 2
        return None

    def to_dict(self):
        return {"f": self.f.to_dict(), "alpha": self.alpha.to_dict(), "verdict": self.verdict,
                "reason": self.reason}


def check_admissible(f: ScalingFunction, alpha: DistortionFunction | None = None) -> AdmissiblePair:
    alpha = alpha or identity_distortion()
    closed, _ = _closed_tail(f)
    d = alpha.degree
    if isinstance(closed, Exponential):
        return AdmissiblePair(f, alpha, "admissible", "geometric decay beats polynomial growth")
    if isinstance(closed, InversePolynomial):
        e = closed.degree
        if e - d > 1:
            return AdmissiblePair(f, alpha, "admissible",
                                  f"terms decay like n^{d - e} with {e} - {d} > 1")
        return AdmissiblePair(f, alpha, "not-admissible",
                              f"terms decay like n^{d - e}; {e} - {d} <= 1 gives a divergent series")
    return AdmissiblePair(f, alpha, "undecided", f"no symbolic rule for {closed.form} tails")


def _round_up(q: Fraction) -> int:
    return -((-q.numerator << _PRECISION) // q.denominator)


def karlsson_radius(f: ScalingFunction, alpha: DistortionFunction | None, epsilon) -> int:
    """Smallest r for which sum_{i>=r} alpha(2i+1) f(i) < epsilon/2 can be certified."""
    alpha = alpha or identity_distortion()
    epsilon = as_fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pair = check_admissible(f, alpha)
    if not pair.admissible:
        raise DomainError(f"(f, alpha) is {pair.verdict}: {pair.reason}")
    half = epsilon / 2
    N = _START_N
    while True:
        M = tail_majorant(f, alpha, N)
        if M is not None and M < half:
            break
        N *= 2
        if N > _MAX_N:
            raise DomainError("tail majorant never drops below epsilon/2")
    target = half * (1 << _PRECISION)
    rounded = []  # rounded[i] = t_i rounded up

    def extend(n):
        while len(rounded) < n:
            rounded.append(_round_up(term(f, alpha, len(rounded))))

    extend(N)
    total = _round_up(tail_majorant(f, alpha, N))
    r = N
    while r > 0 and total + rounded[r - 1] < target:
        total += rounded[r - 1]
        r -= 1
    # a longer exact stretch tightens the majorant; stop once the exact part
    # alone reaches epsilon/2, since no larger n can help after that
    n = N
    while r > 0 and 2 * n <= _CERT_N:
        n *= 2
        extend(n)
        exact = sum(rounded[r - 1:n])
        if not exact < target:
            break
        bound = _round_up(tail_majorant(f, alpha, n))
        while r > 0 and exact + bound < target:
            r -= 1
            if r == 0:
                break
            exact += rounded[r - 1]
    return r


def side_bound(f: ScalingFunction, alpha: DistortionFunction, r: int, k: int) -> Fraction:
    """Bound for a path avoiding N_r whose nearest point is an endpoint and whose
    far endpoint lies at level k."""
    total = sum((term(f, alpha, i) for i in range(r, k + 1)), Fraction(0))
    return total + alpha(2 * k) * f(k)


def path_bound(levels: Sequence[int], f: ScalingFunction, alpha: DistortionFunction, r: int) -> Fraction:
    """Analytic bound for a path with the given basepoint levels avoiding N_r."""
    if len(levels) < 2:
        return Fraction(0)
    t0 = min(range(len(levels)), key=lambda t: levels[t])
    total = Fraction(0)
    if t0 > 0:
        total += side_bound(f, alpha, r, levels[0])
    if t0 < len(levels) - 1:
        total += side_bound(f, alpha, r, levels[-1])
    return total


# -- empirical scans -------------------------------------------------------------------

@dataclass
class ScanRow:
    r: int
    epsilon: Fraction | None
    analytic_bound: Fraction | None  # largest bound among scanned paths
    empirical_max: Fraction | None
    witness: tuple | None
    witness_bound: Fraction | None
    n_paths: int
    violations: list = field(default_factory=list)
    min_slack: Fraction | None = None

    @property
    def inconclusive(self) -> bool:
        return self.n_paths == 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        fs = lambda q: None if q is None else fraction_str(q)
        return {
            "r": self.r, "epsilon": fs(self.epsilon), "analytic_bound": fs(self.analytic_bound),
            "empirical_max": fs(self.empirical_max),
            "witness": [str(v) for v in self.witness] if self.witness else None,
            "witness_bound": fs(self.witness_bound), "n_paths": self.n_paths,
            "violations": len(self.violations), "min_slack": fs(self.min_slack),
            "inconclusive": self.inconclusive,
        }


@dataclass
class ScanReport:
    parameter: dict
    mode: str
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, r: int) -> ScanRow:
        return next(x for x in self.rows if x.r == r)

    def to_dict(self):
        return {"parameter": self.parameter, "mode": self.mode,
                "rows": [r.to_dict() for r in self.rows], "passed": self.passed}


class _Tracker:
    def __init__(self, r, epsilon, f, alpha, metric):
        self.r, self.epsilon, self.f, self.alpha, self.metric = r, epsilon, f, alpha, metric
        self.best = None
        self.best_bound = None
        self.top_bound = None
        self.witness = None
        self.count = 0
        self.violations = []
        self.slack = None
        self._sb = {}

    def side(self, k):
        got = self._sb.get(k)
        if got is None:
            got = side_bound(self.f, self.alpha, self.r, k) * self.metric.denominator
            self._sb[k] = got
        return got

    def record(self, path, scaled_len, start_level, end_level, sides):
        """``sides`` flags whether the path extends before / after its first
        closest point to the basepoint."""
        left, right = sides
        bound = (self.side(start_level) if left else 0) + (self.side(end_level) if right else 0)
        self.count += 1
        if self.top_bound is None or bound > self.top_bound:
            self.top_bound = bound
        slack = bound - scaled_len
        if self.slack is None or slack < self.slack:
            self.slack = slack
        if self.best is None or scaled_len > self.best:
            self.best, self.best_bound, self.witness = scaled_len, bound, tuple(path)
        if scaled_len > bound:
            self.violations.append((tuple(path), scaled_len, bound))

    def row(self, ball):
        den = self.metric.denominator
        fr = lambda q: None if q is None else Fraction(q) / den
        witness = tuple(ball.vertices[i] for i in self.witness) if self.witness else None
        viol = [
            {"path": [str(ball.vertices[i]) for i in p], "length": fraction_str(Fraction(L, den)),
             "bound": fraction_str(Fraction(b) / den)}
            for p, L, b in self.violations
        ]
        return ScanRow(self.r, self.epsilon, fr(self.top_bound), fr(self.best), witness,
                       fr(self.best_bound), self.count, viol, fr(self.slack))


def _geodesic_scan(ball: CayleyBall, f: ScalingFunction, trackers: list) -> None:
    metric = floyd_metric(ball, f)
    level = ball.sphere_index
    adj = metric.adj
    r_min = min(t.r for t in trackers)
    n = len(ball)
    for a in range(n):
        la = level[a]
        if la <= r_min:
            continue
        da = ball.bfs(a)
        certified = {}

        def ok(b, d):
            got = certified.get(b)
            if got is None:
                got = ball.ball_distance_certified(a, b, d)
                certified[b] = got
            return got

        path = [a]

        def rec(u, length, mn, past):
            for w, wt in adj[u]:
                if da[w] != da[u] + 1:
                    continue
                lw = level[w]
                if lw <= r_min:
                    continue
                if not ok(w, int(da[w])):
                    continue
                nl = length + wt
                if lw < mn:
                    nmn, npast = lw, False
                else:
                    nmn, npast = mn, True
                path.append(w)
                for t in trackers:
                    if nmn > t.r:
                        t.record(path, nl, la, lw, (nmn < la, npast))
                rec(w, nl, nmn, npast)
                path.pop()

        rec(a, 0, la, False)


def _sampled_scan(ball: CayleyBall, f: ScalingFunction, rule, trackers: list, samples: int,
                  seed: int, max_length: int | None) -> None:
    from .paths import sample_paths

    metric = floyd_metric(ball, f)
    level = ball.sphere_index
    r_min = min(t.r for t in trackers)
    starts = [i for i in range(len(ball)) if level[i] > r_min]
    if not starts:
        return
    max_length = max_length or rule.max_length(2 * ball.radius)
    for p in sample_paths(ball, rule, starts, samples, seed, max_length, min_level=r_min):
        scaled = sum(w for u, v in zip(p, p[1:]) for x, w in metric.adj[u] if x == v)
        levels = [level[v] for v in p]
        mn = min(levels)
        t0 = levels.index(mn)
        for t in trackers:
            if mn > t.r:
                t.record(p, scaled, levels[0], levels[-1], (t0 > 0, t0 < len(p) - 1))


def empirical_scan(ball: CayleyBall, f: ScalingFunction, c=None, alpha: DistortionFunction | None = None,
                   r=None, epsilon=None, samples: int = 10_000, seed: int = 0,
                   max_length: int | None = None) -> ScanReport:
    """Max Floyd length of valid paths avoiding N_r(center) versus the analytic bound.

    ``r`` may be an int or a sequence of ints; if omitted it is derived from
    ``epsilon``.  Geodesics (c = 1, no alpha) are enumerated exhaustively;
    quasigeodesics and alpha-distorted paths are sampled with a seeded RNG.
    """
    from .paths import _PathRule, effective_distortion

    rule = _PathRule(ball, c, alpha)
    eff = effective_distortion(c, alpha)
    eps = None if epsilon is None else as_fraction(epsilon)
    if r is None:
        if eps is None:
            raise ValueError("give r or epsilon")
        r = karlsson_radius(f, eff, eps)
    rs = [r] if isinstance(r, int) else sorted(set(r))
    metric = floyd_metric(ball, f)
    trackers = [_Tracker(x, eps, f, eff, metric) for x in rs]
    if rule.mode == "geodesic":
        _geodesic_scan(ball, f, trackers)
        mode = "exhaustive"
    else:
        _sampled_scan(ball, f, rule, trackers, samples, seed, max_length)
        mode = "sampled"
    return ScanReport(rule.parameter(), mode, [t.row(ball) for t in trackers])
