import json
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floydkit.groups import (
    BUILTIN_GROUPS,
    DirectProduct,
    FreeAbelianGroup,
    FreeGroup,
    FreeProduct,
    GroupSpecError,
    ResourceError,
    RewritingGroup,
    WordError,
    build_ball,
    load_group,
    normal_form,
    parse_group_spec,
    word_distance,
)


def free_reduce(word):
    # plain stack reduction, independent of the library
    out = []
    for s in word:
        if out and out[-1] == s.swapcase():
            out.pop()
        else:
            out.append(s)
    return out


def words(group, max_len=8):
    return st.lists(st.sampled_from(group.symbols), max_size=max_len)


# -- normal forms -------------------------------------------------------------------


def test_free_cancellation():
    assert normal_form(FreeGroup(2), "a a^-1 b").word == ("b",)


def test_free_abelian_commutation():
    assert normal_form(FreeAbelianGroup(2), "x y x^-1").word == ("y",)


def test_free_product_syllables():
    G = FreeProduct([FreeGroup(1), FreeAbelianGroup(2, ["b", "c"])])
    assert normal_form(G, "a b a^-1 a").word == ("a", "b")


def test_parse_word_forms():
    F = FreeGroup(2)
    assert F.parse_word("a^3 B") == ("a", "a", "a", "B")
    assert F.parse_word("a⁻¹ b") == ("A", "b")
    assert F.parse_word("1") == ()
    with pytest.raises(WordError):
        normal_form(F, "a z")


F2 = FreeGroup(2)


@given(words(F2))
def test_free_normal_form_matches_stack_reduction(w):
    assert list(normal_form(F2, w).word) == free_reduce(w)


Z2 = FreeAbelianGroup(2)


@given(words(Z2))
def test_abelian_normal_form_tracks_exponents(w):
    e = normal_form(Z2, w)
    x = w.count("x") - w.count("X")
    y = w.count("y") - w.count("Y")
    assert e.length == abs(x) + abs(y)
    assert Z2.exponents(e.word) == (x, y)


@pytest.mark.parametrize("name", sorted(BUILTIN_GROUPS))
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_normal_form_idempotent_and_multiplicative(name, data):
    G = load_group(name)
    u = data.draw(words(G, 6))
    v = data.draw(words(G, 6))
    nu, nv = normal_form(G, u), normal_form(G, v)
    assert normal_form(G, nu.word) == nu
    assert normal_form(G, list(u) + list(v)) == normal_form(G, list(nu.word) + list(nv.word))


def test_rewriting_system_agrees_with_free_abelian():
    R = load_group("Z2-rewriting")
    for w in product("xXyY", repeat=4):
        assert R.normal_form(w).length == Z2.normal_form(w).length


def test_non_confluent_rewriting_rejected():
    with pytest.raises(GroupSpecError):
        RewritingGroup(["a", "b"], [("b a", "a b"), ("a a", "b")])


def test_non_decreasing_rule_rejected():
    with pytest.raises(GroupSpecError):
        RewritingGroup(["a", "b"], [("a b", "b a")])


def test_group_spec_json_roundtrip_and_errors(tmp_path):
    G = DirectProduct([FreeGroup(2), FreeGroup(1, ["t"])])
    doc = json.dumps(G.to_dict())
    assert parse_group_spec(doc) == G
    p = tmp_path / "g.json"
    p.write_text(doc)
    assert load_group(str(p)) == G
    with pytest.raises(GroupSpecError, match="line 2"):
        parse_group_spec('{"kind": "free",\n "rank": }')


# -- balls --------------------------------------------------------------------------


def test_ball_sizes():
    b = build_ball(FreeGroup(1), 3)
    assert len(b) == 7 and len(b.edges) == 6
    assert len(build_ball(F2, 2)) == 17
    for R in range(5):
        assert len(build_ball(Z2, R)) == 2 * R * R + 2 * R + 1
        # free group of rank 2: 1 + 4 (3^R - 1) / 2
        assert len(build_ball(F2, R)) == 1 + 2 * (3**R - 1)


def test_ball_budget():
    with pytest.raises(ResourceError, match="budget of 100"):
        build_ball(F2, 5, budget=100)


def test_ball_vertex_order_is_deterministic():
    b1, b2 = build_ball(F2, 3), build_ball(F2, 3)
    assert b1.vertices == b2.vertices
    keys = [F2.sort_key(v.word) for v in b1.vertices]
    assert keys == sorted(keys)


@pytest.mark.parametrize("name", sorted(BUILTIN_GROUPS))
def test_ball_structure(name):
    G = load_group(name)
    R = 3
    b = build_ball(G, R)
    assert all(s == v.length for s, v in zip(b.sphere_index, b.vertices))
    for i, v in enumerate(b.vertices):
        if b.sphere_index[i] < R:
            for s in G.symbols:
                w = G.times_symbol(v, s)
                assert w in b and b.idx(w) in b.neighbors[i]
    # connected
    assert (b.bfs(0) >= 0).all()
    bigger = build_ball(G, R + 1)
    assert set(b.vertices) <= set(bigger.vertices)
    assert {(b.vertices[i], b.vertices[j]) for i, j in b.edges} <= {
        (bigger.vertices[i], bigger.vertices[j]) for i, j in bigger.edges
    } | {(bigger.vertices[j], bigger.vertices[i]) for i, j in bigger.edges}


def test_word_distance_examples():
    Z = build_ball(FreeGroup(1), 3)
    assert word_distance(Z, "a a", "A") == (3, True)
    F = build_ball(F2, 2)
    assert word_distance(F, "a b", "a") == (1, True)
    L = build_ball(Z2, 2)
    assert word_distance(L, "x x", "y y") == (4, True)


def test_word_distance_is_never_below_group_distance():
    L = build_ball(Z2, 2)
    for i, j in combinations(range(len(L)), 2):
        d, exact = L.word_distance(i, j)
        assert d >= L.group_distance(i, j)
        if exact:
            assert d == L.group_distance(i, j)


def test_word_distance_flags_detours():
    # in Z/2 * Z/3 the ball can force a detour; flagged pairs must be overestimates
    b = build_ball(load_group("Z/2*Z/3"), 4)
    for i, j in combinations(range(len(b)), 2):
        d, exact = b.word_distance(i, j)
        assert exact == (d == b.group_distance(i, j))


@pytest.mark.parametrize("name", sorted(BUILTIN_GROUPS))
def test_exact_distances_form_a_metric(name):
    b = build_ball(load_group(name), 3 if name in ("F3", "Z3", "Z2*Z", "F2xZ") else 4)
    D = b.exact_distance_matrix()
    n = len(b)
    assert (D == D.T).all()
    assert (D.diagonal() == 0).all()
    assert (D + np.eye(n, dtype=D.dtype) > 0).all()
    for k in range(n):
        assert (D <= D[:, [k]] + D[[k], :]).all()
