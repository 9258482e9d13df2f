"""Response graphs of finite games and their combinatorial structure."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .game import (
    Game,
    MixedProfile,
    Profile,
    SubgameSpec,
    deviations,
    is_strict,
    iterated_strict_dominance,
    random_game,
    restrict,
    support_subgame,
)
from .scc import condensation, csr_from_lists, is_acyclic, strong_components, topological_order


@dataclass(frozen=True, eq=False)
class ResponseGraph:
    """Digraph on pure profiles; node ``k`` is profile ``nodes[k]`` (row-major)."""

    strategy_counts: tuple[int, ...]
    arcs: tuple[tuple[int, int, int], ...]  # (tail, head, deviating player)
    succ: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return math.prod(self.strategy_counts)

    @property
    def nodes(self) -> list[Profile]:
        return [self.profile(k) for k in range(self.num_nodes)]

    def profile(self, k: int) -> Profile:
        return tuple(int(i) for i in np.unravel_index(k, self.strategy_counts))

    def index(self, profile: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(profile), self.strategy_counts))

    def arc_set(self) -> set[tuple[int, int]]:
        return {(a, b) for a, b, _ in self.arcs}

    def out_degree(self) -> list[int]:
        return [len(s) for s in self.succ]


def _graph_from_arcs(counts: Sequence[int], arcs: Iterable[tuple[int, int, int]]) -> ResponseGraph:
    counts = tuple(counts)
    arcs = tuple(sorted(set(arcs)))
    succ: list[list[int]] = [[] for _ in range(math.prod(counts))]
    for a, b, _ in arcs:
        succ[a].append(b)
    return ResponseGraph(counts, arcs, tuple(tuple(s) for s in succ))


def build_response_graph(g: Game) -> ResponseGraph:
    """Arc p -> q whenever p, q are i-comparable and u_i(p) <= u_i(q)."""
    arcs = []
    for p in g.profiles():
        kp = g.profile_index(p)
        for i, q in deviations(g, p):
            if g.payoffs[p][i] <= g.payoffs[q][i]:
                arcs.append((kp, g.profile_index(q), i))
    return _graph_from_arcs(g.strategy_counts, arcs)


def strict_arc_count(counts: Sequence[int]) -> int:
    total = 0
    for i, c in enumerate(counts):
        total += math.comb(c, 2) * math.prod(counts) // c
    return total


# ---------------------------------------------------------------------------
# Strongly connected components


@dataclass(frozen=True, eq=False)
class SCCDecomposition:
    component_of: tuple[int, ...]
    components: tuple[frozenset[int], ...]  # reverse topological order
    condensation_arcs: frozenset[tuple[int, int]]
    is_sink: tuple[bool, ...]

    @property
    def sinks(self) -> list[frozenset[int]]:
        return [c for c, s in zip(self.components, self.is_sink) if s]

    @property
    def sink_ids(self) -> list[int]:
        return [k for k, s in enumerate(self.is_sink) if s]


def scc_decomposition(rg: ResponseGraph) -> SCCDecomposition:
    indptr, indices = csr_from_lists(rg.succ)
    comps = strong_components(rg.num_nodes, indptr, indices)
    label, arcs = condensation(rg.num_nodes, indptr, indices, comps)
    has_out = {a for a, _ in arcs}
    return SCCDecomposition(
        component_of=tuple(label.tolist()),
        components=tuple(frozenset(c) for c in comps),
        condensation_arcs=frozenset(arcs),
        is_sink=tuple(k not in has_out for k in range(len(comps))),
    )


def is_attracting(rg: ResponseGraph, nodes: Iterable[int]) -> bool:
    inside = set(nodes)
    return all(w in inside for v in inside for w in rg.succ[v])


def escaping_arc(rg: ResponseGraph, nodes: Iterable[int]) -> Optional[tuple[int, int, int]]:
    inside = set(nodes)
    for a, b, i in rg.arcs:
        if a in inside and b not in inside:
            return a, b, i
    return None


def component_is_subgame(rg: ResponseGraph, nodes: Iterable[int]) -> Optional[SubgameSpec]:
    """The subgame whose profile set is exactly ``nodes``, if it is a product set."""
    profiles = {rg.profile(k) for k in nodes}
    if not profiles:
        return None
    per_player = [sorted({p[i] for p in profiles}) for i in range(len(rg.strategy_counts))]
    if math.prod(len(t) for t in per_player) != len(profiles):
        return None
    return SubgameSpec(tuple(tuple(t) for t in per_player))


# ---------------------------------------------------------------------------
# Content


@dataclass(frozen=True, eq=False)
class ComponentContent:
    strategy_counts: tuple[int, ...]
    nodes: frozenset[int]
    boxes: tuple[SubgameSpec, ...]  # maximal product sets inside ``nodes``

    def profiles(self) -> set[Profile]:
        return {tuple(int(i) for i in np.unravel_index(k, self.strategy_counts)) for k in self.nodes}


def _box_inside(box: tuple[frozenset[int], ...], profiles: set[Profile]) -> bool:
    return all(p in profiles for p in itertools.product(*[sorted(t) for t in box]))


def content(rg: ResponseGraph, nodes: Iterable[int]) -> ComponentContent:
    """Enumerate the maximal product boxes contained in ``nodes``.

    Boxes grow one strategy at a time from each singleton; visited boxes are
    memoised so every box inside the node set is expanded once.
    """
    nodes = frozenset(nodes)
    if not nodes:
        raise ValueError("content of an empty node set")
    counts = rg.strategy_counts
    profiles = {rg.profile(k) for k in nodes}
    seen: set[tuple[frozenset[int], ...]] = set()
    maximal: list[tuple[frozenset[int], ...]] = []
    stack = [tuple(frozenset([s]) for s in p) for p in sorted(profiles)]
    while stack:
        box = stack.pop()
        if box in seen:
            continue
        seen.add(box)
        grown = False
        for i, c in enumerate(counts):
            for s in range(c):
                if s in box[i]:
                    continue
                bigger = box[:i] + (box[i] | {s},) + box[i + 1:]
                if _box_inside(bigger, profiles):
                    grown = True
                    if bigger not in seen:
                        stack.append(bigger)
        if not grown:
            maximal.append(box)
    specs = sorted(
        {SubgameSpec(tuple(tuple(sorted(t)) for t in b)) for b in maximal},
        key=lambda y: y.strategies,
    )
    return ComponentContent(counts, nodes, tuple(specs))


def content_member(c: ComponentContent, x: MixedProfile, tol: float = 1e-9) -> bool:
    support = support_subgame(x, tol)
    return any(support.issubset(box) for box in c.boxes)


# ---------------------------------------------------------------------------
# Classification


def pure_nash(rg: ResponseGraph, g: Game) -> set[int]:
    if not is_strict(g):
        raise ValueError("pure_nash via graph sinks needs a strict game")
    return {k for k, s in enumerate(rg.succ) if not s}


def is_dag(rg: ResponseGraph) -> bool:
    return is_acyclic(rg.num_nodes, rg.succ)


def potential_from_dag(rg: ResponseGraph) -> Game:
    """Identical-interest game whose common payoff is a topological rank."""
    order = topological_order(rg.num_nodes, rg.succ)
    rank = np.empty(rg.num_nodes)
    rank[order] = np.arange(rg.num_nodes, dtype=float)
    n = len(rg.strategy_counts)
    pay = np.repeat(rank.reshape(rg.strategy_counts)[..., None], n, axis=-1)
    return Game(rg.strategy_counts, pay, name="rank-potential")


def has_coordination_2x2(rg: ResponseGraph) -> bool:
    """True if some 2x2 subgame of a two-player graph has the Coordination graph."""
    if len(rg.strategy_counts) != 2:
        raise ValueError("defined for two-player graphs")
    n1, n2 = rg.strategy_counts
    arcs = rg.arc_set()
    for a, b in itertools.combinations(range(n1), 2):
        for c, d in itertools.combinations(range(n2), 2):
            corners = [(a, c), (a, d), (b, c), (b, d)]
            idx = {p: rg.index(p) for p in corners}
            sinks = []
            for p in corners:
                outs = [q for q in corners if q != p and (p[0] == q[0] or p[1] == q[1])]
                if not any((idx[p], idx[q]) in arcs for q in outs):
                    sinks.append(p)
            if len(sinks) == 2 and sinks[0][0] != sinks[1][0] and sinks[0][1] != sinks[1][1]:
                return True
    return False


def may_be_preference_zero_sum(rg: ResponseGraph) -> bool:
    """Necessary condition only: no 2x2 subgame with a Coordination graph."""
    return not has_coordination_2x2(rg)


# ---------------------------------------------------------------------------
# Isomorphism respecting the product structure


def _relabelings(counts: Sequence[int]):
    """Yield (player_perm, strategy_perms) mapping a graph onto canonical order.

    Player ``i`` is sent to slot ``player_perm[i]``; slots are sorted by
    strategy count, and players of equal count may swap.
    """
    n = len(counts)
    slots = sorted(range(n), key=lambda i: counts[i])
    groups: dict[int, list[int]] = {}
    for i in slots:
        groups.setdefault(counts[i], []).append(i)
    keys = sorted(groups)
    base_slots = []
    pos = 0
    for k in keys:
        base_slots.append(list(range(pos, pos + len(groups[k]))))
        pos += len(groups[k])
    for perms in itertools.product(*(itertools.permutations(base_slots[j]) for j in range(len(keys)))):
        player_perm = [0] * n
        for j, k in enumerate(keys):
            for i, slot in zip(groups[k], perms[j]):
                player_perm[i] = slot
        for strat in itertools.product(*(itertools.permutations(range(c)) for c in counts)):
            yield player_perm, strat


def canonical_form(rg: ResponseGraph) -> tuple[tuple[int, ...], int]:
    """Smallest arc bitmask over all product-preserving relabelings."""
    counts = rg.strategy_counts
    canon_counts = tuple(sorted(counts))
    total = math.prod(counts)
    profiles = rg.nodes
    arcs = [(a, b) for a, b, _ in rg.arcs]
    best = None
    for player_perm, strat in _relabelings(counts):
        image = []
        for p in profiles:
            q = [0] * len(counts)
            for i, s in enumerate(p):
                q[player_perm[i]] = strat[i][s]
            image.append(int(np.ravel_multi_index(tuple(q), canon_counts)))
        mask = 0
        for a, b in arcs:
            mask |= 1 << (image[a] * total + image[b])
        if best is None or mask < best:
            best = mask
    return canon_counts, best


def _cheap_invariant(rg: ResponseGraph) -> tuple:
    outd = sorted(len(s) for s in rg.succ)
    ind = [0] * rg.num_nodes
    for a, b, _ in rg.arcs:
        ind[b] += 1
    scc = scc_decomposition(rg)
    return (
        tuple(sorted(rg.strategy_counts)),
        tuple(outd),
        tuple(sorted(ind)),
        tuple(sorted(len(c) for c in scc.components)),
        tuple(sorted(len(c) for c in scc.sinks)),
    )


def graphs_isomorphic(a: ResponseGraph, b: ResponseGraph) -> bool:
    if a.num_nodes != b.num_nodes or sorted(a.strategy_counts) != sorted(b.strategy_counts):
        return False
    if len(a.arcs) != len(b.arcs) or _cheap_invariant(a) != _cheap_invariant(b):
        return False
    return canonical_form(a) == canonical_form(b)


def realize_graph(
    target: ResponseGraph, kind: str = "zero_sum", attempts: int = 10_000, seed: int = 0
) -> Optional[Game]:
    """First random game of ``kind`` whose graph is isomorphic to ``target``.

    Attempt ``k`` draws its payoffs from seed ``seed + k``.
    """
    if kind not in ("uniform", "zero_sum"):
        raise ValueError(f"unsupported class {kind!r}")
    inv = _cheap_invariant(target)
    canon = None
    for k in range(attempts):
        g = random_game(target.strategy_counts, seed + k, kind)
        if not is_strict(g):
            continue
        rg = build_response_graph(g)
        if len(rg.arcs) != len(target.arcs) or _cheap_invariant(rg) != inv:
            continue
        if canon is None:
            canon = canonical_form(target)
        if canonical_form(rg) == canon:
            return Game(g.strategy_counts, g.payoffs, name=f"realized-{kind}-{seed + k}")
    return None


# ---------------------------------------------------------------------------
# Sink components of 2 x n games


@dataclass
class SubgameCheckReport:
    n: int
    count: int
    seed: int
    checked: int = 0
    violations: list[list] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def sink_components_are_subgames(g: Game) -> bool:
    rg = build_response_graph(g)
    scc = scc_decomposition(rg)
    return all(component_is_subgame(rg, c) is not None for c in scc.sinks)


def check_2xn_sink_subgames(
    n: int, count: int, seed: int = 42, reduce_dominated: bool = False
) -> SubgameCheckReport:
    """Check that sink components of random strict 2 x n games are product sets.

    With ``reduce_dominated`` the check runs on the subgame left after
    iterated strict dominance.  Without it, dominated strategies can sit on a
    cycle inside a sink component and break the product structure.
    """
    if not 1 <= n <= 6:
        raise ValueError("n must lie in 1..6")
    report = SubgameCheckReport(n=n, count=count, seed=seed)
    k = 0
    while report.checked < count:
        g = random_game((2, n), seed + k, "uniform")
        k += 1
        if not is_strict(g):
            continue
        report.checked += 1
        if reduce_dominated:
            g = restrict(g, iterated_strict_dominance(g))
        if not sink_components_are_subgames(g):
            report.violations.append(g.payoffs.tolist())
    return report


def dominance_reduced_sinks_inside(g: Game) -> bool:
    """Whether every sink component avoids strictly dominated strategies.

    This can fail: a dominated strategy may lie on a cycle of a sink component.
    """
    y = iterated_strict_dominance(g)
    rg = build_response_graph(g)
    scc = scc_decomposition(rg)
    return all(y.contains_profile(rg.profile(k)) for c in scc.sinks for k in c)


# ---------------------------------------------------------------------------
# DOT export


def node_id(profile: Sequence[int]) -> str:
    return "_".join(str(s) for s in profile)


def to_dot(rg: ResponseGraph, scc: Optional[SCCDecomposition] = None, name: str = "response") -> str:
    scc = scc or scc_decomposition(rg)
    lines = [f"digraph {name} {{"]
    in_cluster = set()
    for k, comp in enumerate(scc.sinks):
        lines.append(f"  subgraph cluster_{k} {{")
        lines.append("    style=filled; color=lightgrey;")
        for v in sorted(comp):
            lines.append(f'    "{node_id(rg.profile(v))}";')
            in_cluster.add(v)
        lines.append("  }")
    for v in range(rg.num_nodes):
        if v not in in_cluster:
            lines.append(f'  "{node_id(rg.profile(v))}";')
    for a, b, i in rg.arcs:
        lines.append(f'  "{node_id(rg.profile(a))}" -> "{node_id(rg.profile(b))}" [label={i}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
