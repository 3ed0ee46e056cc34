"""Finitely generated groups with computable normal forms, and finite Cayley-graph balls.

Supported families are exactly those with a canonical-form procedure: free
groups, free abelian groups, free and direct products of supported groups,
and groups given by a finite, confluent, shortlex-decreasing rewriting
system.  Every normal form is the shortlex-least word representing the
element, so its length is the word length.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

Word = tuple  # tuple[str, ...]

DEFAULT_VERTEX_BUDGET = 2_000_000


class GroupSpecError(ValueError):
    """The group description is invalid (generators, rules, confluence)."""


class WordError(ValueError):
    """A word mentions a symbol outside the generating set."""


class ResourceError(RuntimeError):
    """A configured size budget would be exceeded."""


def inverse_symbol(sym: str) -> str:
    return sym.upper() if sym.islower() else sym.lower()


@dataclass(frozen=True, order=False)
class Element:
    """A group element, stored as its normal form."""

    word: Word

    @property
    def length(self) -> int:
        return len(self.word)

    @property
    def normal_form(self) -> Word:
        return self.word

    def __str__(self) -> str:
        return " ".join(self.word) if self.word else "1"

    def __repr__(self) -> str:
        return f"Element({str(self)!r})"


_TOKEN = re.compile(r"([A-Za-z][A-Za-z0-9_]*)(\^-1|⁻¹|\^(-?\d+))?")


class Group:
    """Base class: a symmetric generating set plus a normal-form procedure."""

    kind = "abstract"

    def __init__(self, generators: Sequence[str]):
        generators = tuple(generators)
        if not generators:
            raise GroupSpecError("a group needs at least one generator")
        for g in generators:
            if not isinstance(g, str) or not re.fullmatch(r"[a-z][a-z0-9_]*", g):
                raise GroupSpecError(
                    f"generator name {g!r} must be a lowercase identifier "
                    "(its inverse is the uppercase form)"
                )
        if len(set(generators)) != len(generators):
            raise GroupSpecError(f"duplicate generator names in {generators}")
        self.generators = generators
        symbols = []
        for g in generators:
            symbols += [g, inverse_symbol(g)]
        self.symbols = tuple(symbols)
        self._rank = {s: i for i, s in enumerate(self.symbols)}

    # -- words -------------------------------------------------------------

    def check_word(self, word: Iterable[str]) -> Word:
        word = tuple(word)
        for s in word:
            if s not in self._rank:
                raise WordError(f"unknown symbol {s!r}; generating set is {self.symbols}")
        return word

    def parse_word(self, text: str) -> Word:
        """Parse ``"a b A"``, ``"a b a^-1"``, ``"a b a⁻¹"``, ``"abA"`` or ``"1"``."""
        text = text.strip()
        if text in ("", "1", "e"):
            return ()
        if " " not in text and all(len(g) == 1 for g in self.generators):
            raw = text.replace("^-1", "'").replace("⁻¹", "'")
            tokens = []
            for ch in raw:
                if ch == "'":
                    if not tokens:
                        raise WordError(f"dangling inverse marker in {text!r}")
                    tokens[-1] = inverse_symbol(tokens[-1])
                else:
                    tokens.append(ch)
            return self.check_word(tokens)
        out: list[str] = []
        for tok in text.split():
            m = _TOKEN.fullmatch(tok)
            if not m:
                raise WordError(f"cannot parse token {tok!r}")
            name, suffix, power = m.group(1), m.group(2), m.group(3)
            if suffix is None:
                out.append(name)
            elif power is None:
                out.append(inverse_symbol(name))
            else:
                p = int(power)
                sym = name if p >= 0 else inverse_symbol(name)
                out.extend([sym] * abs(p))
        return self.check_word(out)

    def sort_key(self, word: Word) -> tuple:
        """Shortlex key with symbol order g1 < G1 < g2 < G2 < ..."""
        rank = self._rank
        return (len(word), tuple(rank[s] for s in word))

    # -- normal forms ------------------------------------------------------

    def _reduce(self, word: Word) -> Word:
        raise NotImplementedError

    def _append(self, word: Word, sym: str) -> Word:
        return self._reduce(word + (sym,))

    def normal_form(self, word: Union[Iterable[str], str]) -> Element:
        if isinstance(word, str):
            word = self.parse_word(word)
        return Element(self._reduce(self.check_word(word)))

    def element(self, word: Union[Element, Iterable[str], str]) -> Element:
        if isinstance(word, Element):
            return word
        return self.normal_form(word)

    @property
    def identity(self) -> Element:
        return Element(())

    def multiply(self, a: Element, b: Element) -> Element:
        return Element(self._reduce(a.word + b.word))

    def times_symbol(self, a: Element, sym: str) -> Element:
        return Element(self._append(a.word, sym))

    def inverse(self, a: Element) -> Element:
        return Element(self._reduce(tuple(inverse_symbol(s) for s in reversed(a.word))))

    def distance(self, a: Element, b: Element) -> int:
        """Exact word distance d(a, b) = |a^-1 b|."""
        inv = tuple(inverse_symbol(s) for s in reversed(a.word))
        return len(self._reduce(inv + b.word))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Group) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __repr__(self):
        return f"{type(self).__name__}({json.dumps(self.to_dict(), sort_keys=True)})"


def _default_names(start: str, rank: int) -> list[str]:
    letters = "abcdefghijklmnopqrstuvwxyz"
    i = letters.index(start)
    if i + rank <= len(letters):
        return list(letters[i:i + rank])
    return [f"{start}{k}" for k in range(1, rank + 1)]


class FreeGroup(Group):
    kind = "free"

    def __init__(self, rank: int, generator_names: Sequence[str] | None = None):
        if rank < 1:
            raise GroupSpecError("free group rank must be >= 1")
        names = list(generator_names) if generator_names else _default_names("a", rank)
        if len(names) != rank:
            raise GroupSpecError(f"expected {rank} generator names, got {len(names)}")
        super().__init__(names)
        self.rank = rank

    def _reduce(self, word):
        out: list[str] = []
        for s in word:
            if out and out[-1] == inverse_symbol(s):
                out.pop()
            else:
                out.append(s)
        return tuple(out)

    def _append(self, word, sym):
        if word and word[-1] == inverse_symbol(sym):
            return word[:-1]
        return word + (sym,)

    def to_dict(self):
        return {"kind": "free", "rank": self.rank, "generator_names": list(self.generators)}


class FreeAbelianGroup(Group):
    kind = "free-abelian"

    def __init__(self, rank: int, generator_names: Sequence[str] | None = None):
        if rank < 1:
            raise GroupSpecError("free abelian rank must be >= 1")
        names = list(generator_names) if generator_names else _default_names("x", rank)
        if len(names) != rank:
            raise GroupSpecError(f"expected {rank} generator names, got {len(names)}")
        super().__init__(names)
        self.rank = rank
        self._axis = {}
        for i, g in enumerate(self.generators):
            self._axis[g] = (i, 1)
            self._axis[inverse_symbol(g)] = (i, -1)

    def exponents(self, word: Word) -> tuple[int, ...]:
        e = [0] * self.rank
        for s in word:
            i, sign = self._axis[s]
            e[i] += sign
        return tuple(e)

    def from_exponents(self, exps: Sequence[int]) -> Element:
        if len(exps) != self.rank:
            raise WordError(f"expected {self.rank} exponents")
        out: list[str] = []
        for g, e in zip(self.generators, exps):
            out += [g if e > 0 else inverse_symbol(g)] * abs(e)
        return Element(tuple(out))

    def _reduce(self, word):
        return self.from_exponents(self.exponents(word)).word

    def to_dict(self):
        return {"kind": "free-abelian", "rank": self.rank, "generator_names": list(self.generators)}


class _ProductBase(Group):
    def __init__(self, factors: Sequence[Group]):
        factors = list(factors)
        if len(factors) < 2:
            raise GroupSpecError(f"{self.kind} needs at least two factors")
        names: list[str] = []
        for fac in factors:
            names += list(fac.generators)
        if len(set(names)) != len(names):
            raise GroupSpecError(f"factor generator names must be disjoint, got {names}")
        super().__init__(names)
        self.factors = tuple(factors)
        self._factor_of = {}
        for k, fac in enumerate(self.factors):
            for s in fac.symbols:
                self._factor_of[s] = k

    def to_dict(self):
        return {"kind": self.kind, "factors": [f.to_dict() for f in self.factors]}


class FreeProduct(_ProductBase):
    """Free product; normal forms are alternating sequences of factor syllables."""

    kind = "free-product"

    def syllables(self, word: Word) -> list[tuple[int, Word]]:
        stack: list[tuple[int, Word]] = []
        for s in word:
            k = self._factor_of[s]
            if stack and stack[-1][0] == k:
                w = self.factors[k]._append(stack[-1][1], s)
                if w:
                    stack[-1] = (k, w)
                else:
                    stack.pop()
            else:
                w = self.factors[k]._reduce((s,))
                if w:
                    stack.append((k, w))
        return stack

    def _reduce(self, word):
        out: list[str] = []
        for _, w in self.syllables(word):
            out += w
        return tuple(out)


class DirectProduct(_ProductBase):
    kind = "direct-product"

    def _reduce(self, word):
        parts: list[list[str]] = [[] for _ in self.factors]
        for s in word:
            parts[self._factor_of[s]].append(s)
        out: list[str] = []
        for fac, p in zip(self.factors, parts):
            out += fac._reduce(tuple(p))
        return tuple(out)


class RewritingGroup(Group):
    """Group given by a confluent, shortlex-decreasing rewriting system.

    Free cancellation rules ``sS -> 1`` are added automatically.  Termination
    follows from every rule decreasing the shortlex order; local confluence
    is decided by resolving all critical pairs (overlaps and inclusions of
    left-hand sides, all of length < 2 * max rule length).
    """

    kind = "rewriting"

    def __init__(self, generators: Sequence[str], rules: Sequence[tuple]):
        super().__init__(generators)
        parsed = []
        for lhs, rhs in rules:
            lhs = self.parse_word(lhs) if isinstance(lhs, str) else self.check_word(lhs)
            rhs = self.parse_word(rhs) if isinstance(rhs, str) else self.check_word(rhs)
            if not lhs:
                raise GroupSpecError("rule with empty left-hand side")
            if len(rhs) > len(lhs):
                raise GroupSpecError(f"rule {lhs} -> {rhs} is length-increasing")
            if self.sort_key(rhs) >= self.sort_key(lhs):
                raise GroupSpecError(f"rule {lhs} -> {rhs} does not decrease in shortlex order")
            parsed.append((lhs, rhs))
        self.user_rules = tuple(parsed)
        all_rules = list(parsed)
        have = {lhs for lhs, _ in parsed}
        for s in self.symbols:
            pair = (s, inverse_symbol(s))
            if pair not in have:
                all_rules.append((pair, ()))
        self.rules = tuple(all_rules)
        self._maxl = max(len(lhs) for lhs, _ in self.rules)
        self._by_first: dict[str, list[tuple[Word, Word]]] = {}
        for lhs, rhs in self.rules:
            self._by_first.setdefault(lhs[0], []).append((lhs, rhs))
        bad = self.critical_pair_failures()
        if bad:
            w, x, y = bad[0]
            raise GroupSpecError(
                f"rewriting system is not confluent: {' '.join(w)} reduces to both "
                f"{' '.join(x) or '1'} and {' '.join(y) or '1'} ({len(bad)} failing critical pairs)"
            )

    def _reduce(self, word):
        w = list(word)
        i = 0
        while i < len(w):
            for lhs, rhs in self._by_first.get(w[i], ()):
                if tuple(w[i:i + len(lhs)]) == lhs:
                    w[i:i + len(lhs)] = rhs
                    i = max(0, i - self._maxl)
                    break
            else:
                i += 1
        return tuple(w)

    def critical_pair_failures(self) -> list[tuple[Word, Word, Word]]:
        failures = []
        for l1, r1 in self.rules:
            for l2, r2 in self.rules:
                # overlaps: proper suffix of l1 equals prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] == l2[:k]:
                        w = l1 + l2[k:]
                        a = self._reduce(r1 + l2[k:])
                        b = self._reduce(l1[:-k] + r2)
                        if a != b:
                            failures.append((w, a, b))
                # inclusions: l2 occurs inside l1
                if (l1, r1) != (l2, r2) and len(l2) <= len(l1):
                    for i in range(len(l1) - len(l2) + 1):
                        if l1[i:i + len(l2)] == l2:
                            a = self._reduce(r1)
                            b = self._reduce(l1[:i] + r2 + l1[i + len(l2):])
                            if a != b:
                                failures.append((l1, a, b))
        return failures

    def to_dict(self):
        return {
            "kind": "rewriting",
            "generator_names": list(self.generators),
            "rules": [[" ".join(l), " ".join(r) or "1"] for l, r in self.user_rules],
        }


GroupSpec = Group


def normal_form(spec: Group, word) -> Element:
    return spec.normal_form(word)


# -- group-spec documents ----------------------------------------------------

def group_from_dict(doc: dict) -> Group:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise GroupSpecError("group spec must be an object with a 'kind' field")
    kind = doc["kind"]
    names = doc.get("generator_names")
    if kind == "free":
        return FreeGroup(int(doc["rank"]), names)
    if kind == "free-abelian":
        return FreeAbelianGroup(int(doc["rank"]), names)
    if kind in ("free-product", "direct-product"):
        factors = [group_from_dict(f) for f in doc.get("factors", [])]
        return FreeProduct(factors) if kind == "free-product" else DirectProduct(factors)
    if kind == "rewriting":
        if not names:
            raise GroupSpecError("rewriting spec needs generator_names")
        rules = []
        for r in doc.get("rules", []):
            lhs, rhs = r
            rules.append((lhs, "" if rhs in ("1", "") else rhs))
        return RewritingGroup(names, rules)
    raise GroupSpecError(f"unknown group kind {kind!r}")


def parse_group_spec(text: str) -> Group:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GroupSpecError(
            f"group spec parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return group_from_dict(doc)


BUILTIN_GROUPS = {
    "Z": lambda: FreeGroup(1),
    "F2": lambda: FreeGroup(2),
    "F3": lambda: FreeGroup(3),
    "Z2": lambda: FreeAbelianGroup(2),
    "Z3": lambda: FreeAbelianGroup(3),
    "Z2*Z": lambda: FreeProduct([FreeAbelianGroup(2), FreeGroup(1, ["t"])]),
    "F2xZ": lambda: DirectProduct([FreeGroup(2), FreeGroup(1, ["t"])]),
    "Z2-rewriting": lambda: RewritingGroup(
        ["x", "y"], [("y x", "x y"), ("Y x", "x Y"), ("y X", "X y"), ("Y X", "X Y")]
    ),
    "Z/2*Z/3": lambda: RewritingGroup(
        ["a", "b"], [("A", "a"), ("a a", ""), ("b b", "B"), ("B B", "b")]
    ),
}


def load_group(ref: str) -> Group:
    """Resolve a builtin name, an inline JSON document, or a path to a JSON file."""
    if ref in BUILTIN_GROUPS:
        return BUILTIN_GROUPS[ref]()
    if ref.lstrip().startswith("{"):
        return parse_group_spec(ref)
    with open(ref, encoding="utf-8") as fh:
        return parse_group_spec(fh.read())


# -- Cayley balls ------------------------------------------------------------

class WordDistance(NamedTuple):
    distance: int
    exact: bool


class CayleyBall:
    """The radius-R ball of a Cayley graph around ``center`` (default: identity).

    Vertices are sorted in shortlex order of their normal forms; all index
    based APIs refer to that order.  Instances are treated as immutable; the
    lazily filled caches are pure functions of the ball.
    """

    def __init__(self, group: Group, radius: int, center: Element, vertices, sphere):
        self.group = group
        self.radius = radius
        self.center = center
        self.vertices: tuple[Element, ...] = tuple(vertices)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.sphere_index: tuple[int, ...] = tuple(sphere)
        neighbors = []
        labels = []
        for v in self.vertices:
            nb = {}
            for s in group.symbols:
                j = self.index.get(group.times_symbol(v, s))
                if j is not None and j not in nb:
                    nb[j] = s
            order = sorted(nb)
            neighbors.append(tuple(order))
            labels.append(tuple(nb[j] for j in order))
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(neighbors)
        self.neighbor_labels = tuple(labels)
        self.edges = tuple(sorted((i, j) for i, nb in enumerate(neighbors) for j in nb if i < j))
        self._bfs: dict[int, np.ndarray] = {}
        self._gdist: dict[tuple[int, int], int] = {}
        self._metrics: dict = {}

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, item):
        try:
            return self._coerce(item) in self.index
        except (WordError, TypeError):
            return False

    def _coerce(self, item) -> Element:
        if isinstance(item, Element):
            return item
        return self.group.element(item)

    def idx(self, item) -> int:
        if isinstance(item, (int, np.integer)):
            return int(item)
        e = self._coerce(item)
        try:
            return self.index[e]
        except KeyError:
            raise KeyError(f"{e} is not a vertex of the radius-{self.radius} ball") from None

    def length(self, item) -> int:
        """Distance from the ball's center."""
        return self.sphere_index[self.idx(item)]

    @property
    def boundary(self) -> list[int]:
        return [i for i, s in enumerate(self.sphere_index) if s == self.radius]

    def is_adjacent(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    def bfs(self, source) -> np.ndarray:
        i = self.idx(source)
        got = self._bfs.get(i)
        if got is not None:
            return got
        dist = np.full(len(self), -1, dtype=np.int64)
        dist[i] = 0
        queue = deque([i])
        nbrs = self.neighbors
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for w in nbrs[u]:
                if dist[w] < 0:
                    dist[w] = du
                    queue.append(w)
        dist.setflags(write=False)
        self._bfs[i] = dist
        return dist

    def group_distance(self, a, b) -> int:
        i, j = self.idx(a), self.idx(b)
        key = (i, j) if i <= j else (j, i)
        d = self._gdist.get(key)
        if d is None:
            d = self.group.distance(self.vertices[i], self.vertices[j])
            self._gdist[key] = d
        return d

    def word_distance(self, a, b) -> WordDistance:
        """BFS distance inside the ball, with an exactness certificate.

        Exact when it equals ||a|-|b|| (a lower bound), when |a|+|b| <= R (a
        route through the center stays inside), or when it matches the group
        distance computed from normal forms.
        """
        i, j = self.idx(a), self.idx(b)
        d = int(self.bfs(i)[j])
        la, lb = self.sphere_index[i], self.sphere_index[j]
        exact = d == abs(la - lb) or la + lb <= self.radius or d == self.group_distance(i, j)
        return WordDistance(d, exact)

    def ball_distance_certified(self, i: int, j: int, d: int) -> bool:
        la, lb = self.sphere_index[i], self.sphere_index[j]
        if d == abs(la - lb) or la + lb <= self.radius or la + lb + d <= 2 * self.radius:
            return True
        return d == self.group_distance(i, j)

    def exact_distance_matrix(self) -> np.ndarray:
        """All-pairs exact group distances between ball vertices."""
        if "exact_matrix" in self._metrics:
            return self._metrics["exact_matrix"]
        n = len(self)
        out = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            row = self.bfs(i)
            for j in range(i + 1, n):
                d = int(row[j])
                if not self.ball_distance_certified(i, j, d):
                    d = self.group_distance(i, j)
                out[i, j] = out[j, i] = d
        out.setflags(write=False)
        self._metrics["exact_matrix"] = out
        return out

    def translate(self, g: Element, item) -> Element:
        return self.group.multiply(g, self._coerce(item))

    def __repr__(self):
        return f"CayleyBall({self.group!r}, radius={self.radius}, vertices={len(self)})"


def build_ball(spec: Group, radius: int, center=None, budget: int = DEFAULT_VERTEX_BUDGET) -> CayleyBall:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    center = spec.identity if center is None else spec.element(center)
    seen = {center: 0}
    frontier = [center]
    for n in range(radius):
        nxt = []
        for g in frontier:
            for s in spec.symbols:
                h = spec.times_symbol(g, s)
                if h not in seen:
                    seen[h] = n + 1
                    nxt.append(h)
                    if len(seen) > budget:
                        raise ResourceError(
                            f"ball of radius {radius} exceeds the vertex budget of {budget}"
                        )
        frontier = nxt
    if center == spec.identity:
        for h, d in seen.items():
            if d != h.length:
                raise GroupSpecError(
                    f"normal form of {h} has length {h.length} but BFS depth {d}; "
                    "normal forms are not geodesic"
                )
    order = sorted(seen, key=lambda e: spec.sort_key(e.word))
    return CayleyBall(spec, radius, center, order, [seen[v] for v in order])


def word_distance(ball: CayleyBall, a, b) -> WordDistance:
    return ball.word_distance(a, b)
