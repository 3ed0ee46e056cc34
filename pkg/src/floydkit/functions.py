"""Floyd scaling functions and distortion functions, evaluated exactly.

A scaling function f is positive, nonincreasing with bounded successive
ratios 1 <= f(n)/f(n+1) <= K, and summable.  It is given on n >= 1 and
extended by f(0) := f(1).  A distortion function is a polynomial with
nonnegative rational coefficients satisfying alpha(n) >= n on n >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

Number = Union[int, Fraction, str]

# ratio bound beyond this point is (1 + 1/N)^deg
_RATIO_SPLIT = 64
TABLE_TOLERANCE = Fraction(1, 10**9)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def fraction_str(q: Fraction) -> str:
    q = as_fraction(q)
    return f"{q.numerator}/{q.denominator}"


def poly_eval(coeffs: Sequence, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_compose(outer: Sequence, inner: Sequence) -> list:
    """Coefficients of outer(inner(x)), ascending."""
    result = [Fraction(0)]
    for c in reversed(outer):
        # result = result * inner + c
        prod = [Fraction(0)] * (len(result) + len(inner) - 1)
        for i, a in enumerate(result):
            if a:
                for j, b in enumerate(inner):
                    prod[i + j] += a * b
        prod[0] += c
        result = prod
    while len(result) > 1 and result[-1] == 0:
        result.pop()
    return result


def poly_shift(coeffs: Sequence, s) -> list:
    """Coefficients of p(x + s)."""
    return poly_compose(coeffs, [Fraction(s), Fraction(1)])


def _trim(coeffs):
    coeffs = [as_fraction(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


class ScalingFunction:
    """Common interface; see the concrete forms below."""

    form = "abstract"
    summable: bool | None = True

    def value(self, n: int) -> Fraction:
        raise NotImplementedError

    def __call__(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError("scaling functions are defined on n >= 0")
        return self.value(max(n, 1))

    def ratio_constant(self) -> Fraction:
        """A finite K with f(n)/f(n+1) <= K for all n >= 0."""
        raise NotImplementedError

    def tail_bound(self, r: int) -> Fraction:
        """A rigorous upper bound for the sum of f(n) over n >= r."""
        raise NotImplementedError

    def partial_sum(self, start: int, stop: int) -> Fraction:
        return sum((self(n) for n in range(start, stop)), Fraction(0))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __str__(self):
        return describe_scaling(self)


@dataclass(frozen=True)
class Exponential(ScalingFunction):
    """f(n) = scale * lam**n with lam a rational in (0, 1)."""

    lam: Fraction
    scale: Fraction = Fraction(1)
    form = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "scale", as_fraction(self.scale))
        if not 0 < self.lam < 1:
            raise ValueError(f"exponential base must lie in (0, 1), got {self.lam}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def value(self, n):
        return self.scale * self.lam**n

    def ratio_constant(self):
        return 1 / self.lam

    def tail_bound(self, r):
        if r <= 0:
            return self(0) + self.tail_bound(1)
        return self.scale * self.lam**r / (1 - self.lam)

    def to_dict(self):
        d = {"form": "exponential", "lambda": fraction_str(self.lam)}
        if self.scale != 1:
            d["scale"] = fraction_str(self.scale)
        return d


@dataclass(frozen=True)
class InversePolynomial(ScalingFunction):
    """f(n) = scale / P(n), P with nonnegative integer coefficients (ascending),
    P(0) != 0 and deg P > 1."""

    coefficients: tuple
    scale: Fraction = Fraction(1)
    form = "inverse-polynomial"

    def __post_init__(self):
        coeffs = tuple(int(c) for c in _trim(self.coefficients))
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "scale", as_fraction(self.scale))
        if any(c < 0 for c in coeffs):
            raise ValueError("polynomial coefficients must be nonnegative")
        if coeffs[0] == 0:
            raise ValueError("P(0) must be nonzero")
        if len(coeffs) - 1 <= 1:
            raise ValueError("deg P must exceed 1 for summability")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def P(self, n) -> int:
        return poly_eval(self.coefficients, n)

    def value(self, n):
        return self.scale / self.P(n)

    def ratio_constant(self):
        # for n >= N: P(n+1)/P(n) <= ((n+1)/n)^d <= (1 + 1/N)^d
        N = _RATIO_SPLIT
        best = (1 + Fraction(1, N)) ** self.degree
        for n in range(1, N):
            best = max(best, Fraction(self.P(n + 1), self.P(n)))
        return max(best, Fraction(1))

    def tail_bound(self, r):
        if r <= 0:
            return self(0) + self.tail_bound(1)
        d, lead = self.degree, self.coefficients[-1]
        # sum_{n>=r} 1/P(n) <= 1/P(r) + integral_r^inf dx / (lead x^d)
        return self.scale * (Fraction(1, self.P(r)) + Fraction(1, lead * (d - 1) * r ** (d - 1)))

    def to_dict(self):
        d = {"form": "inverse-polynomial", "coefficients": list(self.coefficients)}
        if self.scale != 1:
            d["scale"] = fraction_str(self.scale)
        return d


@dataclass(frozen=True)
class Table(ScalingFunction):
    """Explicit values f(1), ..., f(m) followed by a closed-form tail."""

    prefix: tuple
    tail: ScalingFunction
    form = "table"

    def __post_init__(self):
        vals = tuple(as_fraction(v) for v in self.prefix)
        object.__setattr__(self, "prefix", vals)
        if not vals:
            raise ValueError("table prefix must be nonempty")
        if any(v <= 0 for v in vals):
            raise ValueError("table values must be positive")
        seq = list(vals) + [self.tail.value(len(vals) + 1)]
        for a, b in zip(seq, seq[1:]):
            if a / b < 1 - TABLE_TOLERANCE:
                raise ValueError(f"table is not nonincreasing ({a} then {b})")

    @property
    def summable(self):
        return self.tail.summable

    def value(self, n):
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        return self.tail.value(n)

    def ratio_constant(self):
        seq = list(self.prefix) + [self.tail.value(len(self.prefix) + 1)]
        best = max((a / b for a, b in zip(seq, seq[1:])), default=Fraction(1))
        return max(best, self.tail.ratio_constant(), Fraction(1))

    def tail_bound(self, r):
        m = len(self.prefix)
        head = sum((self(n) for n in range(r, m + 1)), Fraction(0))
        return head + self.tail.tail_bound(max(r, m + 1))

    def to_dict(self):
        return {
            "form": "table",
            "prefix": [fraction_str(v) for v in self.prefix],
            "tail": self.tail.to_dict(),
        }


def exponential(lam, scale=1) -> Exponential:
    return Exponential(as_fraction(lam), as_fraction(scale))


def inverse_polynomial(coefficients, scale=1) -> InversePolynomial:
    return InversePolynomial(tuple(coefficients), as_fraction(scale))


def inverse_power(k: int, shift: int = 1) -> InversePolynomial:
    """f(n) = 1 / (n + shift)**k."""
    coeffs = [math.comb(k, i) * shift ** (k - i) for i in range(k + 1)]
    return InversePolynomial(tuple(coeffs))


def describe_scaling(f: ScalingFunction) -> str:
    if isinstance(f, Exponential):
        s = f"({f.lam})^n"
    elif isinstance(f, InversePolynomial):
        s = "1/P(n), P=" + ",".join(map(str, f.coefficients))
    elif isinstance(f, Table):
        s = f"table[{len(f.prefix)}]+{describe_scaling(f.tail)}"
    else:
        s = f.form
    scale = getattr(f, "scale", Fraction(1))
    return s if scale == 1 else f"{scale}*{s}"


def scaling_from_dict(doc: dict) -> ScalingFunction:
    form = doc.get("form")
    scale = as_fraction(doc.get("scale", 1))
    if form == "exponential":
        return exponential(doc["lambda"], scale)
    if form == "inverse-polynomial":
        return inverse_polynomial(doc["coefficients"], scale)
    if form == "table":
        return Table(tuple(doc["prefix"]), scaling_from_dict(doc["tail"]))
    raise ValueError(f"unknown scaling function form {form!r}")


def parse_scaling(spec) -> ScalingFunction:
    """Accepts a dict, or shorthand ``exp:1/2``, ``2^-n``, ``invpoly:1,2,1``, ``invpow:4``."""
    if isinstance(spec, ScalingFunction):
        return spec
    if isinstance(spec, dict):
        return scaling_from_dict(spec)
    text = str(spec).strip().replace(" ", "")
    if text.startswith("{"):
        import json

        return scaling_from_dict(json.loads(text))
    if text.endswith("^-n"):
        return exponential(Fraction(1, int(text[:-3])))
    head, _, rest = text.partition(":")
    if head == "exp":
        return exponential(rest)
    if head == "invpoly":
        return inverse_polynomial([int(c) for c in rest.split(",")])
    if head == "invpow":
        k, _, shift = rest.partition(",")
        return inverse_power(int(k), int(shift) if shift else 1)
    raise ValueError(f"cannot parse scaling function {spec!r}")


@dataclass(frozen=True)
class DistortionFunction:
    """alpha(n) = sum c_i n^i with nonnegative rational c_i and alpha(n) >= n."""

    coefficients: tuple = field(default=(Fraction(0), Fraction(1)))

    def __post_init__(self):
        coeffs = tuple(_trim(self.coefficients))
        object.__setattr__(self, "coefficients", coeffs)
        if any(c < 0 for c in coeffs):
            raise ValueError("distortion coefficients must be nonnegative")
        bad = self._violation()
        if bad is not None:
            raise ValueError(f"distortion function violates alpha(n) >= n at n={bad}")

    def _violation(self):
        c = self.coefficients
        d = len(c) - 1
        if d <= 1:
            c1 = c[1] if d == 1 else Fraction(0)
            if c1 < 1:
                # c0 + c1 n >= n fails for large n unless c1 >= 1
                n = math.ceil(c[0] / (1 - c1)) + 1 if c1 < 1 else 0
                return n
            return None
        if c[1] >= 1:
            return None
        # alpha(n) >= n  <=>  h(n) = (alpha(n) - c_1 n) / n >= 1 - c_1 for n >= 1;
        # h is convex on n > 0, so only its integer minimiser needs checking
        h = lambda n: (self(n) - c[1] * n) / n
        hi = 1
        while h(hi + 1) < h(hi):
            hi *= 2
        lo = 1
        while lo < hi:  # first n with h(n + 1) >= h(n)
            mid = (lo + hi) // 2
            if h(mid + 1) >= h(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo if h(lo) < 1 - c[1] else None

    def __call__(self, n) -> Fraction:
        return poly_eval(self.coefficients, Fraction(n))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def is_integer_valued(self, upto: int) -> bool:
        return all(self(n).denominator == 1 for n in range(upto + 1))

    def to_dict(self):
        return {"form": "polynomial", "coefficients": [fraction_str(c) for c in self.coefficients]}

    def __str__(self):
        terms = []
        for i, c in enumerate(self.coefficients):
            if c:
                terms.append(f"{c}" if i == 0 else f"{c}n^{i}" if c != 1 else f"n^{i}")
        return "+".join(terms) or "0"


def distortion(coefficients) -> DistortionFunction:
    return DistortionFunction(tuple(as_fraction(c) for c in coefficients))


def identity_distortion() -> DistortionFunction:
    return distortion([0, 1])


def affine_distortion(c) -> DistortionFunction:
    """alpha(n) = c n + c, the distortion of a c-quasi-isometric map."""
    c = as_fraction(c)
    return distortion([c, c])


def parse_distortion(spec) -> DistortionFunction:
    """Accepts a dict, ``poly:0,0,1`` (ascending coefficients), ``id``, ``n^2``, ``affine:2``."""
    if isinstance(spec, DistortionFunction):
        return spec
    if isinstance(spec, dict):
        return distortion(spec["coefficients"])
    text = str(spec).strip().replace(" ", "")
    if text in ("id", "n"):
        return identity_distortion()
    if text.startswith("n^"):
        k = int(text[2:])
        return distortion([0] * k + [1])
    head, _, rest = text.partition(":")
    if head == "poly":
        return distortion([Fraction(c) for c in rest.split(",")])
    if head == "affine":
        return affine_distortion(Fraction(rest))
    raise ValueError(f"cannot parse distortion function {spec!r}")
