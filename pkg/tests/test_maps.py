from fractions import Fraction as F
from itertools import combinations, permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floydkit.floyd import floyd_metric
from floydkit.functions import distortion, exponential, inverse_power
from floydkit.groups import FreeAbelianGroup, FreeGroup, build_ball, load_group
from floydkit.maps import (
    EquivalenceRelation,
    MapSpec,
    MapVerificationError,
    check_condition_6,
    check_condition_13,
    lipschitz_constant,
    lipschitz_constant_alpha,
    map_from_dict,
    quasiconvexity_scan,
    shortcut_pseudometric,
    subgroup_vertices,
    verify_lipschitz,
)

HALF = exponential(F(1, 2))
INV2 = inverse_power(2)
Z, Z2, F2 = FreeGroup(1), FreeAbelianGroup(2), FreeGroup(2)


def float_sup(f1, f2, inner, N=20000):
    n = np.arange(N + 1, dtype=float)
    g = np.ceil(np.polyval(list(reversed([float(c) for c in inner])), n))

    def ev(f, x):
        if f.form == "exponential":
            return float(f.lam) ** np.maximum(x, 1)
        return 1 / np.polyval(list(reversed([float(c) for c in f.coefficients])), np.maximum(x, 1))

    return (ev(f2, n) / ev(f1, g)).max()


# -- compatibility conditions ----------------------------------------------------------


def test_condition_6_polynomial():
    rep = check_condition_6(INV2, INV2, 3)
    assert rep.verdict == "bounded" and rep.D == 9
    # the limit is approached from below and never reached
    assert rep.horizon_sup < 9 and float_sup(INV2, INV2, [0, 3]) < 9
    assert float_sup(INV2, INV2, [0, 3]) > 9 - 1e-3


def test_condition_6_exponential():
    rep = check_condition_6(exponential(F(1, 2)), exponential(F(1, 4)), 2)
    assert rep.verdict == "bounded" and rep.D == 1 and rep.exact_sup
    assert check_condition_6(exponential(F(1, 2)), exponential(F(1, 3)), 2).verdict == "unbounded"


def test_condition_6_unbounded_has_a_witness():
    rep = check_condition_6(HALF, INV2, 1)
    assert rep.verdict == "unbounded" and not rep.passed
    n, ratio = rep.witness
    assert ratio == INV2(n) / HALF(n) and ratio > 2**64


def test_condition_6_mixed_forms():
    rep = check_condition_6(INV2, HALF, 2)
    assert rep.verdict == "bounded"
    assert rep.D >= rep.horizon_sup
    assert abs(float(rep.D) - float_sup(INV2, HALF, [0, 2])) < 1e-12


def test_condition_13():
    rep = check_condition_13(INV2, inverse_power(4), distortion([0, 0, 1]))
    assert rep.verdict == "bounded" and rep.D == 1
    assert check_condition_13(inverse_power(4), INV2, distortion([0, 0, 1])).verdict == "unbounded"


# -- Lipschitz constants ------------------------------------------------------------------


def test_lipschitz_constant_values():
    assert lipschitz_constant(1, 1, 2, 2, 0) == F(1, 16)
    assert lipschitz_constant(1, 1, F(9, 4), F(9, 4), 0) == F(32, 729)
    assert lipschitz_constant(1, 2, 2, 2, 0) == F(1, 32)
    # c = 3/2: n0 = ceil(3) = 3 and ceil(9/4) = 3
    assert lipschitz_constant(F(3, 2), 1, 2, 2, 0) == 1 / (3 * F(8) * 8)
    assert lipschitz_constant_alpha(2, 1, 2, 1) == F(1, 2 * 2 * 32)
    with pytest.raises(ValueError):
        lipschitz_constant(1, 0, 2, 2, 0)


@given(st.fractions(min_value=1, max_value=5), st.fractions(min_value=F(1, 10), max_value=10),
       st.fractions(min_value=1, max_value=4), st.integers(0, 3))
def test_doubling_D_halves_the_constant(c, D, K, d):
    assert lipschitz_constant(c, 2 * D, K, K, d) == lipschitz_constant(c, D, K, K, d) / 2
    assert lipschitz_constant(c, D, K, K, d + 1) <= lipschitz_constant(c, D, K, K, d)


# -- maps ----------------------------------------------------------------------------------


def test_map_evaluation_and_roundtrip():
    incl = MapSpec(Z, F2, "subgroup-inclusion", images={"a": "a b"}, c=2)
    assert str(incl("a a")) == "a b a b"
    assert str(incl("A")) == "B A"
    back = map_from_dict(incl.to_dict())
    assert back.images == incl.images and back.c == 2
    al = MapSpec(Z, Z, "homomorphism", images={"a": "a a"}, alpha=distortion([0, 2]))
    assert map_from_dict(al.to_dict()).alpha(3) == 6


def test_map_spec_errors():
    with pytest.raises(ValueError):
        MapSpec(Z, F2, "homomorphism", images={}, c=1)
    with pytest.raises(ValueError):
        MapSpec(Z, F2, "homomorphism", images={"a": "a"})
    with pytest.raises(ValueError):
        MapSpec(Z, F2, "bijection", images={"a": "a"}, c=1)


def test_declared_class_violation():
    tripling = MapSpec(Z, Z, "homomorphism", images={"a": "a a a"}, c=1)
    with pytest.raises(MapVerificationError):
        tripling.verify_declared(build_ball(Z, 3))
    ok = MapSpec(Z, Z, "homomorphism", images={"a": "a a a"}, c=3)
    assert ok.verify_declared(build_ball(Z, 3)) == 21


def test_identity_map_is_lipschitz():
    ident = MapSpec(Z, Z, "homomorphism", images={"a": "a"}, c=1)
    rep = verify_lipschitz(ident, build_ball(Z, 8), build_ball(Z, 8), HALF, HALF, F(1, 8), pair_radius=3)
    assert rep.passed and rep.min_upper_ratio == 1 and not rep.failures


def test_tripling_map_fails_definitely():
    tripling = MapSpec(Z, Z, "homomorphism", images={"a": "a a a"}, c=3)
    rep = verify_lipschitz(tripling, build_ball(Z, 8), build_ball(Z, 24), HALF, HALF, 1, pair_radius=3)
    assert not rep.passed
    # 1 -> a has length 1/2 while a^3 sits at distance 1/2 + 1/2 + 1/4
    assert {"pair": ["1", "a"], "upper": "1/2", "target_lower": "5/4"} in rep.failures


@pytest.mark.parametrize("target,image", [(F2, "a"), (Z2, "x")])
def test_inclusions_are_lipschitz(target, image):
    incl = MapSpec(Z, target, "subgroup-inclusion", images={"a": image}, c=1)
    eps = lipschitz_constant(1, 1, INV2.ratio_constant(), INV2.ratio_constant(), 0)
    rep = verify_lipschitz(incl, build_ball(Z, 12), build_ball(target, 6), INV2, INV2, eps, pair_radius=4)
    assert rep.passed and not rep.failures


def test_image_outside_target_ball():
    incl = MapSpec(Z, F2, "subgroup-inclusion", images={"a": "a b"}, c=2)
    with pytest.raises(ValueError, match="outside the target ball"):
        verify_lipschitz(incl, build_ball(Z, 5), build_ball(F2, 4), HALF, HALF, F(1, 10), pair_radius=3)


def test_basepoint_translation_is_an_isometry():
    g = Z2.element("x x Y")
    ball0 = build_ball(Z2, 4)
    ballg = build_ball(Z2, 4, center=g)
    m0 = floyd_metric(ball0, HALF)
    mg = floyd_metric(ballg, HALF, basepoint=g)
    ginv = Z2.inverse(g)
    for i, j in combinations(range(len(ballg)), 2):
        x, y = ballg.vertices[i], ballg.vertices[j]
        a, b = ball0.idx(Z2.multiply(ginv, x)), ball0.idx(Z2.multiply(ginv, y))
        assert mg.upper(i, j) == m0.upper(a, b)


# -- shortcut pseudometric ------------------------------------------------------------------


def chain_oracle(D, labels):
    """Shortest chains between classes, by brute force over class orderings."""
    n = len(D)
    cls = sorted(set(labels))
    gap = {(p, q): min(D[i][j] for i in range(n) for j in range(n) if labels[i] == p and labels[j] == q)
           for p in cls for q in cls}
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            a, b = labels[i], labels[j]
            if a == b:
                out[i][j] = F(0)
                continue
            best = gap[a, b]
            others = [c for c in cls if c not in (a, b)]
            for k in range(1, len(others) + 1):
                for mid in permutations(others, k):
                    seq = (a,) + mid + (b,)
                    best = min(best, sum(gap[seq[t], seq[t + 1]] for t in range(len(seq) - 1)))
            out[i][j] = best
    return out


def l1(points):
    return [[F(abs(p[0] - q[0]) + abs(p[1] - q[1])) for q in points] for p in points]


points_and_labels = st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=n, max_size=n),
    st.lists(st.integers(0, 3), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(points_and_labels)
def test_shortcut_matches_chain_oracle(data):
    pts, labels = data
    D = l1(pts)
    S = shortcut_pseudometric(pts, D, labels)
    assert S == chain_oracle(D, labels)
    n = len(pts)
    for i in range(n):
        for j in range(n):
            assert S[i][j] <= D[i][j] and S[i][j] == S[j][i]
            for k in range(n):
                assert S[i][j] <= S[i][k] + S[k][j]
    assert shortcut_pseudometric(pts, S, labels) == S


@settings(max_examples=50, deadline=None)
@given(points_and_labels)
def test_coarser_relations_shrink_distances(data):
    pts, labels = data
    D = l1(pts)
    fine = shortcut_pseudometric(pts, D, labels)
    coarse = shortcut_pseudometric(pts, D, [x // 2 for x in labels])
    assert all(c <= f for rc, rf in zip(coarse, fine) for c, f in zip(rc, rf))


def test_shortcut_extremes():
    pts = [(0, 0), (1, 0), (2, 0), (3, 0)]
    D = l1(pts)
    assert shortcut_pseudometric(pts, D, EquivalenceRelation.trivial(4)) == D
    assert shortcut_pseudometric(pts, D, [0, 0, 0, 0]) == [[0] * 4] * 4
    # gluing the two ends of a path of length 3
    S = shortcut_pseudometric(pts, D, [0, 1, 2, 0])
    assert S[0][3] == 0 and S[1][2] == 1 and S[0][2] == 1 and S[1][3] == 1


def test_shortcut_input_errors():
    with pytest.raises(ValueError, match="symmetric"):
        shortcut_pseudometric([0, 1], [[0, 1], [2, 0]], [0, 1])
    with pytest.raises(ValueError, match="negative"):
        shortcut_pseudometric([0, 1], [[0, -1], [-1, 0]], [0, 1])
    with pytest.raises(ValueError, match="not zero"):
        shortcut_pseudometric([0, 1], [[1, 1], [1, 0]], [0, 1])
    with pytest.raises(ValueError, match="differ in size"):
        shortcut_pseudometric([0, 1], [[0, 1], [1, 0]], [0])
    with pytest.raises(ValueError, match="two classes"):
        EquivalenceRelation(2, ((0, 1), (1,)))


# -- quasiconvexity ---------------------------------------------------------------------------


def test_free_factor_is_convex():
    G = load_group("Z2*Z")
    incl = MapSpec(Z2, G, "subgroup-inclusion", images={"x": "x", "y": "y"}, c=1)
    rep = quasiconvexity_scan(build_ball(G, 4), incl)
    assert rep.passed and rep.max_deviation == 0
    assert rep.subgroup_points == 41 and rep.pairs == 820


def diagonal_oracle(R):
    """Max L1 distance from the diagonal over monotone lattice paths between
    diagonal points, staying in the L1 ball of radius R."""
    diag = [(k, k) for k in range(-R, R + 1) if 2 * abs(k) <= R]
    best = 0
    for (a, _), (b, _) in combinations(diag, 2):
        lo, hi = min(a, b), max(a, b)
        for x in range(lo, hi + 1):
            for y in range(lo, hi + 1):
                if abs(x) + abs(y) <= R:
                    best = max(best, min(abs(x - k) + abs(y - k) for k, _ in diag))
    return best


def test_diagonal_is_not_convex():
    incl = MapSpec(Z, Z2, "subgroup-inclusion", images={"a": "x y"}, c=2)
    ball = build_ball(Z2, 4)
    assert len(subgroup_vertices(ball, incl)) == 5
    rep = quasiconvexity_scan(ball, incl, C=1)
    assert rep.max_deviation == diagonal_oracle(4) == 4
    assert not rep.passed
    assert rep.witness["deviation"] == 4
