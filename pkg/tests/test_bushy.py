"""Bushy-tree combinatorics tests.

The bigness vectors asserted below were worked out by hand from the
inductive definition (n-big above sigma iff sigma is a member or at least n
children are n-big) before being run, and the marking implementation is
additionally played against the naive subset-search mirror on exhaustive
small domains.
"""

from __future__ import annotations

from itertools import chain, combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnrlab.bushy import (
    BIG_CAP,
    CounterexampleWitness,
    LemmaHolds,
    MalformedTree,
    OrderFunction,
    PreconditionViolated,
    TreeWitness,
    brute_force_is_n_big,
    bushiness_numbers,
    closure,
    closure_check,
    intersection_bushiness_check,
    is_n_big,
    is_n_small,
    level_nodes,
    region_nodes,
    subtree_nodes,
    union_smallness_check,
    verify_bushy,
    verify_tree_shape,
    witness_tree,
)

G2 = OrderFunction.constant(2)
G3 = OrderFunction.constant(3)
G6 = OrderFunction.constant(6)


# ---------------------------------------------------------------------------
# Order functions.

def test_order_function_table_and_tail():
    g = OrderFunction((2, 3, 3), tail_base=3, tail_period=2)
    assert [g(n) for n in range(8)] == [2, 3, 3, 3, 3, 4, 4, 5]


def test_order_function_constant_tail():
    g = OrderFunction.constant(4)
    assert [g(n) for n in (0, 1, 100)] == [4, 4, 4]


def test_order_function_tail_never_narrows():
    g = OrderFunction((5,), tail_base=2, tail_period=3)
    # the linear tail starts below the table value and is clamped up;
    # 2 + (n - 1) // 3 first exceeds 5 at n = 13
    assert [g(n) for n in range(14)] == [5] * 13 + [6]


@pytest.mark.parametrize("spec", ["3", "2,3,4", "2,2;tail=2,1", "8;tail=0,3"])
def test_order_function_spec_roundtrip(spec):
    g = OrderFunction.from_spec(spec)
    assert OrderFunction.from_spec(g.to_spec()) == g
    assert g.to_spec() == OrderFunction.from_spec(g.to_spec()).to_spec()


@pytest.mark.parametrize("bad", ["", "1", "3,2", "2;tail=x", "2;tails=1,1", "2;tail=1"])
def test_order_function_bad_specs(bad):
    with pytest.raises(ValueError):
        OrderFunction.from_spec(bad)


def test_order_function_first_level_with():
    g = OrderFunction((2, 3), tail_base=0, tail_period=2)
    assert g.first_level_with(2) == 0
    assert g.first_level_with(3) == 1
    assert g.first_level_with(5) == 12  # tail reaches 5 at (n - 2) // 2 >= 5
    assert g.value(12) == 5 and g.value(11) == 4
    assert OrderFunction.constant(3).first_level_with(4) is None


def test_node_validation():
    g = OrderFunction((2, 4))
    assert g.validate_node(())
    assert g.validate_node((1, 3))
    assert not g.validate_node((2,))
    assert not g.validate_node((0, 4))


def test_region_enumeration():
    assert list(level_nodes(G2, 1)) == [(0,), (1,)]
    assert len(list(region_nodes(G3, 2))) == 1 + 3 + 9
    assert list(region_nodes(G2, 2, (1,))) == [(1,), (1, 0), (1, 1)]


# ---------------------------------------------------------------------------
# Bigness marking: hand-derived vectors.

def test_member_at_stem_is_maximally_big():
    beta = bushiness_numbers({()}, G3, 2)
    assert beta[()] == BIG_CAP


def test_strict_prefix_member_never_certifies():
    # the root is a member, but bigness above (0,) only sees extensions
    assert is_n_big({()}, 1, G3, (), 2)
    assert not is_n_big({()}, 1, G3, (0,), 2)


def test_hand_vector_two_big_three_small():
    B = {(0, 0), (0, 1), (1, 0), (1, 1), (2,)}
    beta = bushiness_numbers(B, G3, 2)
    assert beta[(0,)] == 2 and beta[(1,)] == 2
    assert beta[(2,)] == BIG_CAP
    assert beta[()] == 2
    assert is_n_big(B, 2, G3, (), 2)
    assert is_n_small(B, 3, G3, (), 2)


def test_full_level_is_maximally_wide():
    B = set(level_nodes(G3, 2))
    beta = bushiness_numbers(B, G3, 2)
    assert beta[()] == 3  # every child is 3-big, and the width caps at 3


def test_bigness_rejects_n_zero():
    with pytest.raises(ValueError):
        is_n_big(set(), 0, G2, (), 1)


def test_bigness_rejects_invalid_members():
    with pytest.raises(ValueError):
        is_n_big({(5,)}, 1, G2, (), 2)
    with pytest.raises(ValueError):
        is_n_big({(0, 0, 0)}, 1, G2, (), 2)


def _powerset(items):
    items = list(items)
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


def test_marking_matches_brute_force_exhaustively():
    region = list(region_nodes(G2, 2))
    stems = list(region_nodes(G2, 2))
    for B in _powerset(region):
        B = frozenset(B)
        for stem in stems:
            beta = bushiness_numbers(B, G2, 2, stem)
            for n in (1, 2):
                assert (beta[stem] >= n) == brute_force_is_n_big(B, n, G2, stem, 2), \
                    (B, stem, n)


node_st = st.lists(st.integers(0, 2), max_size=3).map(tuple)
set_st = st.frozensets(node_st, max_size=10)


@given(set_st, st.sampled_from([(), (0,), (2,)]), st.integers(1, 3))
@settings(max_examples=200, deadline=None)
def test_marking_matches_brute_force_random(B, stem, n):
    assert is_n_big(B, n, G3, stem, 3) == brute_force_is_n_big(B, n, G3, stem, 3)


@given(set_st, st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_bigness_monotone_in_n(B, n):
    if is_n_big(B, n + 1, G3, (), 3):
        assert is_n_big(B, n, G3, (), 3)


@given(set_st, set_st, st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_bigness_monotone_in_set(B1, B2, n):
    if is_n_big(B1, n, G3, (), 3):
        assert is_n_big(B1 | B2, n, G3, (), 3)


# ---------------------------------------------------------------------------
# Witness trees.

def test_witness_tree_simple():
    B = {(0, 0), (0, 1), (1, 0), (1, 1), (2,)}
    w = witness_tree(B, 2, G3, (), 2)
    verify_bushy(w, 2, G3, exactly=True, leaves_in=frozenset(B))
    # lex-least greedy: children 0 and 1 of the root are picked
    assert (0,) in w.nodes and (1,) in w.nodes and (2,) not in w.nodes


def test_witness_tree_member_stem():
    w = witness_tree({(1,)}, 3, G3, (1,), 2)
    assert w.nodes == frozenset({(1,)})
    assert w.leaves() == frozenset({(1,)})


def test_witness_tree_requires_bigness():
    with pytest.raises(ValueError):
        witness_tree({(0,)}, 2, G3, (), 2)


@given(set_st, st.integers(1, 3))
@settings(max_examples=150, deadline=None)
def test_witness_tree_always_verifies(B, n):
    if is_n_big(B, n, G3, (), 3):
        w = witness_tree(B, n, G3, (), 3)
        verify_bushy(w, n, G3, exactly=True, leaves_in=frozenset(B))


def test_verify_tree_shape_rejections():
    with pytest.raises(MalformedTree):
        verify_tree_shape(TreeWitness((), frozenset({(0,)})), G3)  # stem missing
    with pytest.raises(MalformedTree):
        verify_tree_shape(TreeWitness((), frozenset({(), (0, 0)})), G3)  # orphan
    with pytest.raises(MalformedTree):
        verify_tree_shape(TreeWitness((1,), frozenset({(1,), (0,)})), G3)  # off-stem
    with pytest.raises(MalformedTree):
        verify_tree_shape(TreeWitness((), frozenset({(), (4,)})), G3)  # invalid string


def test_verify_bushy_counts():
    full = TreeWitness((), frozenset({(), (0,), (1,), (2,)}))
    verify_bushy(full, 3, G3, exactly=True)
    with pytest.raises(MalformedTree):
        verify_bushy(full, 4, G3)
    two = TreeWitness((), frozenset({(), (0,), (1,)}))
    verify_bushy(two, 2, G3, exactly=True)
    with pytest.raises(MalformedTree):
        verify_bushy(two, 2, G3, leaves_in=frozenset({(0,)}))
    with pytest.raises(MalformedTree):
        verify_bushy(full, 2, G3, exactly=True)  # three children, not exactly two


# ---------------------------------------------------------------------------
# Closure.

def test_closure_hand_vector():
    B = frozenset({(0, 0), (0, 1), (1, 0), (1, 1), (2,)})
    starred = closure(B, 2, G3, 2)
    assert starred == B | {(), (0,), (1,)}
    verdict = closure_check(B, 2, G3, 2)
    assert isinstance(verdict, LemmaHolds)


def test_closure_contains_base():
    B = frozenset({(0,), (1, 1), (2, 0)})
    for n in (1, 2, 3):
        assert B <= closure(B, n, G3, 2)


def test_closure_pruning_bound():
    # nodes outside the closure have at most n-1 children inside it
    B = frozenset({(0, 0), (1, 0), (2, 0)})
    n = 2
    starred = closure(B, n, G3, 2)
    for tau in region_nodes(G3, 1):
        if tau in starred:
            continue
        inside = sum(1 for c in range(3) if tau + (c,) in starred)
        assert inside <= n - 1


@given(set_st, st.integers(1, 3))
@settings(max_examples=150, deadline=None)
def test_closure_check_random(B, n):
    assert isinstance(closure_check(B, n, G3, 3), LemmaHolds)


# ---------------------------------------------------------------------------
# Union smallness lemma.

def test_union_smallness_hand_instance():
    v = union_smallness_check({(0,)}, 2, {(1,)}, 2, G3, (), 2)
    assert isinstance(v, LemmaHolds)


def test_union_smallness_precondition():
    big = set(level_nodes(G3, 1))  # 3-big, so certainly 2-big
    v = union_smallness_check(big, 2, set(), 2, G3, (), 2)
    assert isinstance(v, PreconditionViolated)


@given(set_st, set_st, st.integers(1, 2), st.integers(1, 2))
@settings(max_examples=150, deadline=None)
def test_union_smallness_never_refuted(B1, B2, m, n):
    v = union_smallness_check(B1, m, B2, n, G3, (), 3)
    assert not isinstance(v, CounterexampleWitness)


# ---------------------------------------------------------------------------
# Intersection bushiness inside an exact ambient tree.

def _pruned_full_tree(g, depth, keep):
    """Subtree of the full depth-`depth` tree keeping child values in `keep`."""
    nodes = {()}
    frontier = [()]
    while frontier:
        tau = frontier.pop()
        if len(tau) == depth:
            continue
        for c in keep:
            child = tau + (c,)
            nodes.add(child)
            frontier.append(child)
    return frozenset(nodes)


def test_intersection_bushiness_holds():
    k = 1
    ambient = TreeWitness((), _pruned_full_tree(G6, 2, range(6)))
    F = _pruned_full_tree(G6, 2, range(4))          # children 0..3: 4-bushy
    C = _pruned_full_tree(G6, 2, range(2, 6))       # children 2..5: 4-bushy
    v = intersection_bushiness_check(ambient, F, C, k, G6)
    assert isinstance(v, LemmaHolds)


def test_intersection_bushiness_preconditions():
    k = 1
    ambient = TreeWitness((), _pruned_full_tree(G6, 2, range(6)))
    thin = _pruned_full_tree(G6, 2, range(3))  # only 3-bushy
    ok = _pruned_full_tree(G6, 2, range(4))
    v = intersection_bushiness_check(ambient, thin, ok, k, G6)
    assert isinstance(v, PreconditionViolated)
    not_exact = TreeWitness((), _pruned_full_tree(G6, 2, range(5)))
    v2 = intersection_bushiness_check(not_exact, ok, ok, k, G6)
    assert isinstance(v2, PreconditionViolated)


def test_subtree_nodes_drops_orphans():
    w = TreeWitness((), frozenset({(), (0,), (0, 0), (1,), (1, 1)}))
    kept = subtree_nodes(w, frozenset({(), (0, 0), (1,), (1, 1)}))
    # (0,0) lost its parent, so it goes too
    assert kept.nodes == frozenset({(), (1,), (1, 1)})
