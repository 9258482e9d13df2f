from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinkchain.catalog import CATALOG_NAMES, catalog
from sinkchain.game import (
    Game,
    MixedProfile,
    SubgameSpec,
    is_strict,
    iterated_strict_dominance,
    random_game,
    random_strict_game,
)
from sinkchain.response import (
    build_response_graph,
    canonical_form,
    check_2xn_sink_subgames,
    component_is_subgame,
    content,
    content_member,
    dominance_reduced_sinks_inside,
    graphs_isomorphic,
    has_coordination_2x2,
    is_attracting,
    is_dag,
    potential_from_dag,
    pure_nash,
    realize_graph,
    scc_decomposition,
    strict_arc_count,
    to_dot,
)
from sinkchain.scc import csr_from_lists, is_acyclic, strong_components

SHAPES = [(2, 2), (2, 3), (3, 3), (2, 2, 2), (3, 2, 2), (1, 4)]


def brute_arcs(g: Game) -> set[tuple[int, int]]:
    out = set()
    profs = list(g.profiles())
    for p, q in itertools.permutations(profs, 2):
        diff = [i for i in range(g.num_players) if p[i] != q[i]]
        if len(diff) == 1 and g.payoffs[p][diff[0]] <= g.payoffs[q][diff[0]]:
            out.add((g.profile_index(p), g.profile_index(q)))
    return out


def reachable(succ, v):
    seen = {v}
    stack = [v]
    while stack:
        for w in succ[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# -- construction -------------------------------------------------------------------


def test_matching_pennies_is_a_four_cycle():
    rg = build_response_graph(catalog("mp"))
    assert len(rg.arcs) == 4
    assert all(len(s) == 1 for s in rg.succ)
    assert len(reachable(rg.succ, 0)) == 4


def test_tied_pair_has_two_arcs():
    g = Game((2, 2), [[[1, 0], [1, 0]], [[0, 1], [0, 2]]])
    arcs = build_response_graph(g).arc_set()
    assert (0, 1) in arcs and (1, 0) in arcs
    assert len(arcs) == 5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(SHAPES))
def test_arcs_match_brute_force(seed, shape):
    g = random_game(shape, seed)
    rg = build_response_graph(g)
    assert rg.arc_set() == brute_arcs(g)
    for a, b, i in rg.arcs:
        pa, pb = rg.profile(a), rg.profile(b)
        assert [k for k in range(len(shape)) if pa[k] != pb[k]] == [i]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(SHAPES))
def test_strict_arc_count(seed, shape):
    g = random_strict_game(shape, seed)
    assert len(build_response_graph(g).arcs) == strict_arc_count(shape)


def test_strict_arc_count_formula_by_hand():
    assert strict_arc_count((2, 2)) == 4
    assert strict_arc_count((3, 3)) == 18
    assert strict_arc_count((2, 2, 2)) == 12


# -- components -----------------------------------------------------------------------


def test_catalog_components():
    mp = scc_decomposition(build_response_graph(catalog("mp")))
    assert [len(c) for c in mp.components] == [4] and mp.is_sink == (True,)
    co = scc_decomposition(build_response_graph(catalog("co")))
    assert len(co.components) == 4 and all(len(c) == 1 for c in co.components)
    assert sorted(sorted(c) for c in co.sinks) == [[0], [3]]
    rps = scc_decomposition(build_response_graph(catalog("rps")))
    assert [len(c) for c in rps.components] == [9]
    inner = scc_decomposition(build_response_graph(catalog("inner_diamond")))
    assert [len(c) for c in inner.sinks] == [1]
    assert sorted(len(c) for c in inner.components) == [1, 8]
    outer = scc_decomposition(build_response_graph(catalog("outer_diamond")))
    assert [len(c) for c in outer.sinks] == [8]
    assert sorted(len(c) for c in outer.components) == [1, 8]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(SHAPES))
def test_decomposition_properties(seed, shape):
    g = random_strict_game(shape, seed)
    rg = build_response_graph(g)
    scc = scc_decomposition(rg)
    nodes = sorted(v for c in scc.components for v in c)
    assert nodes == list(range(rg.num_nodes))
    # mutual reachability oracle
    reach = [reachable(rg.succ, v) for v in range(rg.num_nodes)]
    for c in scc.components:
        for v in c:
            assert {w for w in reach[v] if v in reach[w]} == set(c)
    # reverse topological order: arcs between components go to earlier ones
    for a, b in scc.condensation_arcs:
        assert b < a
    assert scc.sinks
    for c in scc.sinks:
        assert is_attracting(rg, c)
        for v in c:
            rest = set(c) - {v}
            # minimality: dropping any node lets an arc escape
            if rest:
                assert not is_attracting(rg, rest)


def test_dag_components_are_singletons():
    rg = build_response_graph(catalog("dd"))
    assert all(len(c) == 1 for c in scc_decomposition(rg).components)


def test_is_attracting_examples():
    rg = build_response_graph(catalog("sd"))
    assert is_attracting(rg, range(4))
    for c in scc_decomposition(rg).sinks:
        assert is_attracting(rg, c)
    assert not is_attracting(rg, [rg.index((1, 0))])


def test_component_is_subgame_examples():
    rg = build_response_graph(catalog("mp"))
    assert component_is_subgame(rg, range(4)) == SubgameSpec.full((2, 2))
    assert component_is_subgame(rg, [2]) == SubgameSpec.singleton((1, 0))
    assert component_is_subgame(rg, [0, 1, 2]) is None


def test_components_of_a_long_cycle():
    n = 20_000
    succ = [[v + 1] for v in range(n - 1)] + [[0]]
    indptr, indices = csr_from_lists(succ)
    assert [len(c) for c in strong_components(n, indptr, indices)] == [n]
    assert not is_acyclic(n, succ)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_components_match_reachability(n, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < rng.uniform(0.05, 0.4)
    succ = [np.flatnonzero(row).tolist() for row in adj]
    reach = adj | np.eye(n, dtype=bool)
    for k in range(n):  # transitive closure
        reach |= reach[:, [k]] & reach[[k], :]
    mutual = reach & reach.T
    comps = strong_components(n, *csr_from_lists(succ))
    assert sorted(v for c in comps for v in c) == list(range(n))
    pos = {}
    for i, c in enumerate(comps):
        for v in c:
            assert mutual[v, c].all()
            pos[v] = i
    for v in range(n):
        assert {w for w in range(n) if mutual[v, w]} == set(comps[pos[v]])
        # sinks first: arcs never point to a later component
        assert all(pos[w] <= pos[v] for w in succ[v])
    assert is_acyclic(n, succ) == all(len(c) == 1 and c[0] not in succ[c[0]] for c in comps)


# -- content ---------------------------------------------------------------------


def test_content_examples():
    rg = build_response_graph(catalog("mp"))
    full = content(rg, range(4))
    assert full.boxes == (SubgameSpec.full((2, 2)),)
    assert content_member(full, MixedProfile((np.array([0.3, 0.7]), np.array([0.5, 0.5]))))
    single = content(rg, [rg.index((0, 1))])
    assert content_member(single, MixedProfile.vertex((2, 2), (0, 1)))
    assert not content_member(single, MixedProfile.uniform((2, 2)))


def test_outer_diamond_content_boxes():
    rg = build_response_graph(catalog("outer_diamond"))
    scc = scc_decomposition(rg)
    (sink,) = scc.sinks
    boxes = {str(b) for b in content(rg, sink).boxes}
    # the 8-node sink misses only (1,1)
    assert boxes == {"0,2;0,1,2", "0,1,2;0,2"}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(2, 2), (2, 3), (3, 3), (2, 2, 2)]), st.data())
def test_content_membership_oracle(seed, shape, data):
    rng = np.random.default_rng(seed)
    rg = build_response_graph(random_game(shape, seed))
    n = int(np.prod(shape))
    w = set(data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True)))
    c = content(rg, w)
    for box in c.boxes:
        assert all(rg.index(p) in w for p in box.profiles())
        for other in c.boxes:
            assert other == box or not box.issubset(other)
    for _ in range(10):
        parts = []
        for k in shape:
            v = rng.dirichlet(np.ones(k))
            v[rng.random(k) < 0.5] = 0.0
            if v.sum() == 0:
                v[rng.integers(k)] = 1.0
            parts.append(v / v.sum())
        x = MixedProfile(tuple(parts))
        supp = [np.flatnonzero(p > 1e-9) for p in parts]
        want = all(rg.index(p) in w for p in itertools.product(*supp))
        assert content_member(c, x) == want


# -- Nash, DAG, classification ---------------------------------------------------------


def test_pure_nash_examples():
    co = catalog("co")
    assert pure_nash(build_response_graph(co), co) == {0, 3}
    mp = catalog("mp")
    assert pure_nash(build_response_graph(mp), mp) == set()
    dd = catalog("dd")
    assert pure_nash(build_response_graph(dd), dd) == {0}
    tied = Game((2, 2), [[[1, 0], [1, 0]], [[0, 1], [0, 2]]])
    with pytest.raises(ValueError):
        pure_nash(build_response_graph(tied), tied)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(SHAPES))
def test_pure_nash_matches_payoff_oracle(seed, shape):
    g = random_strict_game(shape, seed)
    rg = build_response_graph(g)
    want = set()
    for p in g.profiles():
        ok = True
        for i, c in enumerate(shape):
            for s in range(c):
                if s != p[i]:
                    q = p[:i] + (s,) + p[i + 1:]
                    ok &= g.payoffs[p][i] > g.payoffs[q][i]
        if ok:
            want.add(g.profile_index(p))
    assert pure_nash(rg, g) == want


def test_is_dag_examples():
    assert is_dag(build_response_graph(catalog("co")))
    assert not is_dag(build_response_graph(catalog("mp")))
    assert not is_dag(build_response_graph(catalog("inner_diamond")))


def test_potential_from_dag_reproduces_graph():
    found = 0
    seed = 0
    while found < 50:
        g = random_strict_game((2, 3), seed)
        seed += 1
        rg = build_response_graph(g)
        if not is_dag(rg):
            continue
        found += 1
        pot = potential_from_dag(rg)
        assert build_response_graph(pot).arc_set() == rg.arc_set()


def test_potential_from_dag_rejects_cycles():
    with pytest.raises(ValueError):
        potential_from_dag(build_response_graph(catalog("mp")))


def test_coordination_pattern_detection():
    assert has_coordination_2x2(build_response_graph(catalog("co")))
    assert not has_coordination_2x2(build_response_graph(catalog("mp")))
    assert not has_coordination_2x2(build_response_graph(catalog("rps")))


# -- isomorphism and realization ---------------------------------------------------------


def swap_players(g: Game) -> Game:
    return Game(g.strategy_counts[::-1], np.transpose(g.payoffs, (1, 0, 2))[..., ::-1])


def test_isomorphism_examples():
    mp = build_response_graph(catalog("mp"))
    assert graphs_isomorphic(mp, build_response_graph(swap_players(catalog("mp"))))
    assert not graphs_isomorphic(mp, build_response_graph(catalog("co")))
    assert not graphs_isomorphic(mp, build_response_graph(catalog("rps")))


def test_double_dominance_games_are_isomorphic():
    found = []
    seed = 0
    while len(found) < 2:
        g = random_strict_game((2, 2), seed)
        seed += 1
        rg = build_response_graph(g)
        a, b = g.payoffs[..., 0], g.payoffs[..., 1]
        row_dom = np.all(a[0] > a[1]) or np.all(a[1] > a[0])
        col_dom = np.all(b[:, 0] > b[:, 1]) or np.all(b[:, 1] > b[:, 0])
        if row_dom and col_dom:
            found.append(rg)
    assert graphs_isomorphic(*found)
    assert graphs_isomorphic(found[0], build_response_graph(catalog("dd")))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(2, 2), (2, 3), (3, 3)]), st.data())
def test_canonical_form_invariant_under_relabeling(seed, shape, data):
    g = random_strict_game(shape, seed)
    perms = [data.draw(st.permutations(range(c))) for c in shape]
    pay = g.payoffs[np.ix_(*perms)]
    h = Game(shape, pay)
    assert canonical_form(build_response_graph(g)) == canonical_form(build_response_graph(h))


def test_realize_graph_examples():
    mp = build_response_graph(catalog("mp"))
    g = realize_graph(mp, "zero_sum", attempts=100, seed=0)
    assert g is not None and graphs_isomorphic(build_response_graph(g), mp)
    assert realize_graph(build_response_graph(catalog("co")), "zero_sum", attempts=2000, seed=0) is None


def test_realize_inner_diamond():
    target = build_response_graph(catalog("inner_diamond"))
    g = realize_graph(target, "zero_sum", attempts=10_000, seed=1)
    assert g is not None
    assert np.array_equal(g.payoffs[..., 0], -g.payoffs[..., 1])
    assert graphs_isomorphic(build_response_graph(g), target)


# -- 2 x n lemma, dominance ---------------------------------------------------------------


def test_2x2_sink_components_are_subgames():
    report = check_2xn_sink_subgames(2, 300, seed=42)
    assert report.checked == 300 and report.passed


@pytest.mark.parametrize("n", [3, 4])
def test_2xn_sink_components_are_subgames_after_dominance(n):
    report = check_2xn_sink_subgames(n, 300, seed=42, reduce_dominated=True)
    assert report.checked == 300
    assert report.passed, report.violations[:1]


# Strict 2x3 game whose sink component holds a dominated column: column 2 is
# beaten by column 1 in both rows, yet (0,2) lies on the cycle
# (0,0) -> (0,2) -> (0,1) -> (1,1) -> (1,0) -> (0,0).
DOMINATED_IN_SINK = Game(
    (2, 3),
    np.stack(
        [
            np.array([[0.91, 0.27, 0.93], [0.63, 0.51, 0.88]]),
            np.array([[0.07, 0.62, 0.08], [0.78, 0.75, 0.5]]),
        ],
        axis=-1,
    ),
)


def test_dominated_strategy_can_sit_in_a_sink_component():
    g = DOMINATED_IN_SINK
    rg = build_response_graph(g)
    (sink,) = scc_decomposition(rg).sinks
    assert sorted(rg.profile(v) for v in sink) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]
    assert component_is_subgame(rg, sink) is None
    assert not dominance_reduced_sinks_inside(g)
    assert iterated_strict_dominance(g) == SubgameSpec(((0, 1), (0, 1)))


def test_3x3_sink_components_need_not_be_subgames():
    # the outer diamond sink is not a product set
    rg = build_response_graph(catalog("outer_diamond"))
    (sink,) = scc_decomposition(rg).sinks
    assert component_is_subgame(rg, sink) is None


@pytest.mark.parametrize("shape", [(2, 2), (3, 3)])
def test_zero_sum_games_have_one_sink(shape):
    for seed in range(100):
        g = random_strict_game(shape, seed, "zero_sum")
        assert len(scc_decomposition(build_response_graph(g)).sinks) == 1


# -- catalog, DOT ------------------------------------------------------------------------


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_catalog_games_are_strict(name):
    assert is_strict(catalog(name))


def test_catalog_unknown_name_lists_choices():
    with pytest.raises(KeyError, match="available: mp"):
        catalog("chicken")


def test_diamond_catalog_entries_are_zero_sum():
    for name in ("inner_diamond", "outer_diamond"):
        g = catalog(name)
        assert np.array_equal(g.payoffs[..., 0], -g.payoffs[..., 1])


def test_dot_export():
    rg = build_response_graph(catalog("co"))
    dot = to_dot(rg, name="co")
    assert dot.startswith("digraph co {")
    assert dot.count("subgraph cluster_") == 2
    assert "style=filled" in dot
    assert '"0_0" -> ' not in dot  # (0,0) is a sink
    assert '"0_1" -> "0_0" [label=1];' in dot
    assert dot.count("->") == 4
