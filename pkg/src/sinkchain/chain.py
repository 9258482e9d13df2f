"""Finite-resolution chain components via box maps.

Each player's simplex is cut into barycentric grid cells of denominator
``kappa``: a cell is indexed by a floor vector ``a`` with ``kappa - sum(a)``
in ``[1, n-1]`` and equals ``{z in simplex : a/kappa <= z <= (a+1)/kappa}``.
A box is one cell per player.  Boxes are mapped through the time-``T`` flow
at sample points, padded by ``rho`` in the infinity norm, and the nontrivial
strongly connected components of the resulting digraph are the Morse sets.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .game import Game, MixedProfile, SubgameSpec, as_mixed, dump_game, random_strict_game
from .replicator import IntegrationError, flow_batch
from .response import (
    SCCDecomposition,
    build_response_graph,
    content,
    scc_decomposition,
)
from .scc import condensation, csr_from_arcs, has_self_loop, strong_components

HOLDS = "holds"
VIOLATED = "violated"
UNRESOLVED = "unresolved-at-resolution"

DEFAULT_BOX_BUDGET = 5_000_000


class BudgetError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Cells of one simplex


@dataclass(frozen=True, eq=False)
class SimplexCells:
    n: int
    kappa: int
    floors: np.ndarray  # (C, n) int, sorted lexicographically
    vertices: np.ndarray  # (C, V, n), padded by repeating the first vertex
    centers: np.ndarray  # (C, n)

    @property
    def count(self) -> int:
        return len(self.floors)

    def lookup(self) -> dict[tuple[int, ...], int]:
        return {tuple(a): k for k, a in enumerate(self.floors.tolist())}

    def distance_mask(self, pts: np.ndarray, d: float) -> np.ndarray:
        """``mask[i, c]`` is True iff cell ``c`` comes within ``d`` of ``pts[i]``."""
        lo_cell = self.floors / self.kappa
        hi_cell = (self.floors + 1) / self.kappa
        lo = np.maximum(lo_cell[None], pts[:, None, :] - d)
        hi = np.minimum(hi_cell[None], pts[:, None, :] + d)
        eps = 1e-12
        ok = np.all(lo <= hi + eps, axis=2)
        ok &= lo.sum(axis=2) <= 1.0 + eps
        ok &= hi.sum(axis=2) >= 1.0 - eps
        return ok

    def containing_mask(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Cells whose closure contains each point."""
        k = pts[:, None, :] * self.kappa
        return np.all((k >= self.floors[None] - tol) & (k <= self.floors[None] + 1 + tol), axis=2)

    def face_mask(self, face: Sequence[int]) -> np.ndarray:
        """Cells whose closure meets the face spanned by strategies ``face``."""
        inside = np.zeros(self.n, dtype=bool)
        inside[list(face)] = True
        a = self.floors
        ok = np.all(a[:, ~inside] == 0, axis=1)
        s = a[:, inside].sum(axis=1)
        return ok & (s <= self.kappa) & (s + inside.sum() >= self.kappa)

    def vertex_cell(self, s: int) -> int:
        if self.n == 1:
            return 0
        a = [0] * self.n
        a[s] = self.kappa - 1
        return self.lookup()[tuple(a)]


def simplex_cells(n: int, kappa: int) -> SimplexCells:
    if n == 1:
        floors = np.array([[kappa - 1]])
        return SimplexCells(1, kappa, floors, np.ones((1, 1, 1)), np.ones((1, 1)))
    floors = []
    for r in range(1, n):
        for a in _compositions(kappa - r, n):
            floors.append(a)
    floors.sort()
    floors = np.array(floors, dtype=np.int64)
    sums = floors.sum(axis=1)
    rs = kappa - sums
    vmax = max(math.comb(n, r) for r in range(1, n))
    verts = np.empty((len(floors), vmax, n))
    for c, (a, r) in enumerate(zip(floors, rs)):
        vs = []
        for sub in itertools.combinations(range(n), int(r)):
            v = a.astype(float)
            v[list(sub)] += 1
            vs.append(v / kappa)
        vs += [vs[0]] * (vmax - len(vs))
        verts[c] = vs
    centers = (floors + rs[:, None] / n) / kappa
    return SimplexCells(n, kappa, floors, verts, centers)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def simplex_cell_count(n: int, kappa: int) -> int:
    if n == 1:
        return 1
    return sum(math.comb(kappa - r + n - 1, n - 1) for r in range(1, n))


# ---------------------------------------------------------------------------
# Box covers


@dataclass(frozen=True, eq=False)
class BoxCover:
    strategy_counts: tuple[int, ...]
    kappa: int
    cells: tuple[SimplexCells, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.count for c in self.cells)

    @property
    def num_boxes(self) -> int:
        return math.prod(self.shape)

    @property
    def delta(self) -> float:
        return 1.0 / self.kappa if max(self.strategy_counts) > 1 else 0.0

    def box_id(self, cell_ids: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(cell_ids), self.shape))

    def box_cells(self, box: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(box, self.shape))

    def box_floors(self, box: int) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(self.cells[p].floors[c].tolist()) for p, c in enumerate(self.box_cells(box)))

    def vertex_box(self, profile: Sequence[int]) -> int:
        return self.box_id([cells.vertex_cell(s) for cells, s in zip(self.cells, profile)])

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        return np.split(flat, np.cumsum(self.strategy_counts)[:-1], axis=-1)

    def boxes_near(self, flat: np.ndarray, d: float) -> np.ndarray:
        """Sorted ids of boxes within ``d`` of the point ``flat``."""
        masks = [c.distance_mask(x[None], d)[0] for c, x in zip(self.cells, self.split(flat))]
        return _product_ids([np.flatnonzero(m) for m in masks], self.shape)

    def boxes_containing(self, flat: np.ndarray) -> np.ndarray:
        masks = [c.containing_mask(x[None])[0] for c, x in zip(self.cells, self.split(flat))]
        return _product_ids([np.flatnonzero(m) for m in masks], self.shape)

    def box_center(self, box: int) -> np.ndarray:
        return np.concatenate([self.cells[p].centers[c] for p, c in enumerate(self.box_cells(box))])

    def contains(self, box: int, flat: np.ndarray, tol: float = 1e-12) -> bool:
        cells = self.box_cells(box)
        return all(
            bool(self.cells[p].containing_mask(x[None], tol)[0, c])
            for p, (c, x) in enumerate(zip(cells, self.split(flat)))
        )


def _product_ids(per_player: Sequence[np.ndarray], shape: Sequence[int]) -> np.ndarray:
    ids = np.zeros(1, dtype=np.int64)
    for idx, radix in zip(per_player, shape):
        ids = (ids[:, None] * radix + idx[None, :]).reshape(-1)
    return ids


def suggest_kappa(counts: Sequence[int], budget: int) -> int:
    k = 1
    while math.prod(simplex_cell_count(n, k + 1) for n in counts) <= budget:
        k += 1
    return k


def build_cover(g: Game, kappa: int, budget: int = DEFAULT_BOX_BUDGET) -> BoxCover:
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    counts = g.strategy_counts
    total = math.prod(simplex_cell_count(n, kappa) for n in counts)
    if total > budget:
        raise BudgetError(
            f"{total} boxes at kappa={kappa} exceed the budget of {budget}; "
            f"try kappa={suggest_kappa(counts, budget)}"
        )
    return BoxCover(counts, kappa, tuple(simplex_cells(n, kappa) for n in counts))


def default_kappa(counts: Sequence[int]) -> int:
    return 16 if max(counts) <= 2 else 8


def cell_adjacency(cells: SimplexCells) -> list[np.ndarray]:
    """Neighbours of each cell: cells whose closures intersect it (itself included)."""
    a = cells.floors
    lo = np.maximum(a[:, None, :], a[None, :, :])
    hi = np.minimum(a[:, None, :] + 1, a[None, :, :] + 1)
    ok = np.all(lo <= hi, axis=2) & (lo.sum(axis=2) <= cells.kappa) & (hi.sum(axis=2) >= cells.kappa)
    return [np.flatnonzero(row) for row in ok]


def box_layer(cover: BoxCover, boxes: Sequence[int]) -> np.ndarray:
    """``boxes`` together with every box whose closure meets one of them."""
    adj = [cell_adjacency(c) for c in cover.cells]
    out = set()
    for b in boxes:
        cells = cover.box_cells(int(b))
        out.update(_product_ids([adj[p][c] for p, c in enumerate(cells)], cover.shape).tolist())
    return np.array(sorted(out), dtype=np.int64)


# ---------------------------------------------------------------------------
# Box map


@dataclass(frozen=True, eq=False)
class BoxMapGraph:
    cover: BoxCover
    T: float
    m: int
    rho: float
    dt: float
    seed: int
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_arcs(self) -> int:
        return int(self.indices.size)

    def successors(self, box: int) -> np.ndarray:
        return self.indices[self.indptr[box]:self.indptr[box + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)


def box_samples(cover: BoxCover, n_random: int = 8, seed: int = 0) -> tuple[np.ndarray, int]:
    """Sample points for every box; returns ``(points, m)`` with ``points`` of
    shape ``(num_boxes * m, D)`` ordered box by box."""
    shape = cover.shape
    grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
    cell_ids = [gr.reshape(-1) for gr in grids]  # per player, one entry per box
    nb = cover.num_boxes
    vcounts = [c.vertices.shape[1] for c in cover.cells]
    combos = list(itertools.product(*(range(v) for v in vcounts)))
    rng = np.random.default_rng(seed)
    blocks = []
    for combo in combos:
        blocks.append(np.concatenate(
            [c.vertices[ids, k] for c, ids, k in zip(cover.cells, cell_ids, combo)], axis=1))
    blocks.append(np.concatenate([c.centers[ids] for c, ids in zip(cover.cells, cell_ids)], axis=1))
    for _ in range(n_random):
        parts = []
        for c, ids in zip(cover.cells, cell_ids):
            w = rng.dirichlet(np.ones(c.vertices.shape[1]), size=nb)
            parts.append(np.einsum("bv,bvn->bn", w, c.vertices[ids]))
        blocks.append(np.concatenate(parts, axis=1))
    pts = np.stack(blocks, axis=1)  # (nb, m, D)
    return pts.reshape(nb * len(blocks), -1), len(blocks)


def _join(pt_a, val_a, pt_b, val_b, n_pts, radix_b):
    cnt_b = np.bincount(pt_b, minlength=n_pts)
    start_b = np.cumsum(cnt_b) - cnt_b
    reps = cnt_b[pt_a]
    out_pt = np.repeat(pt_a, reps)
    out_val = np.repeat(val_a, reps)
    ends = np.cumsum(reps)
    offset = np.arange(ends[-1] if ends.size else 0) - np.repeat(ends - reps, reps)
    return out_pt, out_val * radix_b + val_b[start_b[out_pt] + offset]


def image_boxes(cover: BoxCover, images: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """(point index, box id) pairs for boxes within ``rho`` of each image point."""
    # strict "< rho"; rho = 0 degrades to the containing boxes
    d = rho - 1e-12 if rho > 0 else 0.0
    parts = cover.split(images)
    n = len(images)
    pt, val = np.arange(n), np.zeros(n, dtype=np.int64)
    for cells, x, radix in zip(cover.cells, parts, cover.shape):
        mask = cells.distance_mask(x, d)
        pb, vb = np.nonzero(mask)
        pt, val = _join(pt, val, pb, vb, n, radix)
    return pt, val


def box_map(
    g: Game,
    cover: BoxCover,
    T: float = 1.0,
    n_random: int = 8,
    rho: Optional[float] = None,
    dt: float = 0.01,
    seed: int = 0,
) -> BoxMapGraph:
    if not T > 0:
        raise ValueError("T must be positive")
    if g.strategy_counts != cover.strategy_counts:
        raise ValueError("cover does not match the game")
    rho = cover.delta if rho is None else float(rho)
    pts, m = box_samples(cover, n_random, seed)
    try:
        images = flow_batch(g, pts, T, dt)
    except IntegrationError as exc:
        raise IntegrationError(f"box map failed ({exc})", exc.time) from exc
    bad = ~np.all(np.isfinite(images), axis=1)
    if np.any(bad):
        raise IntegrationError(f"non-finite image for box {int(np.flatnonzero(bad)[0]) // m}", T)
    nb = cover.num_boxes
    max_cells = max(c.count * c.n for c in cover.cells)
    chunk = max(m, (4_000_000 // max_cells) // m * m)
    keys = []
    for lo in range(0, len(images), chunk):
        pt, head = image_boxes(cover, images[lo:lo + chunk], rho)
        tail = (pt + lo) // m
        keys.append(np.unique(tail * nb + head))
    key = np.unique(np.concatenate(keys))
    indptr, indices = csr_from_arcs(nb, key // nb, key % nb)
    return BoxMapGraph(cover, float(T), m, rho, dt, seed, indptr, indices)


# ---------------------------------------------------------------------------
# Morse decomposition


@dataclass(frozen=True, eq=False)
class MorseDecomposition:
    graph: BoxMapGraph
    morse_sets: tuple[np.ndarray, ...]  # sorted box ids, ordered by smallest box
    morse_of: np.ndarray  # per box: Morse set index or -1 when transient
    is_sink: tuple[bool, ...]
    arcs: frozenset[tuple[int, int]]  # reachability between Morse sets through transient boxes

    @property
    def sinks(self) -> list[int]:
        return [k for k, s in enumerate(self.is_sink) if s]

    @property
    def transient(self) -> np.ndarray:
        return np.flatnonzero(self.morse_of < 0)


def morse_decomposition(bmg: BoxMapGraph) -> MorseDecomposition:
    n = bmg.cover.num_boxes
    comps = strong_components(n, bmg.indptr, bmg.indices)
    label, carcs = condensation(n, bmg.indptr, bmg.indices, comps)
    loops = has_self_loop(bmg.indptr, bmg.indices)
    nontrivial = [len(c) > 1 or bool(loops[c[0]]) for c in comps]
    succ: list[list[int]] = [[] for _ in comps]
    for a, b in carcs:
        succ[a].append(b)
    # components come sinks first, so successors are always resolved before use
    reach: list[frozenset[int]] = []
    for k in range(len(comps)):
        r: set[int] = set()
        for j in succ[k]:
            r |= {j} if nontrivial[j] else reach[j]
        reach.append(frozenset(r))
    order = sorted((k for k in range(len(comps)) if nontrivial[k]), key=lambda k: comps[k][0])
    renum = {k: i for i, k in enumerate(order)}
    morse_of = np.full(n, -1, dtype=np.int64)
    sets = []
    for i, k in enumerate(order):
        boxes = np.array(comps[k], dtype=np.int64)
        morse_of[boxes] = i
        sets.append(boxes)
    arcs = frozenset((renum[k], renum[j]) for k in order for j in reach[k])
    is_sink = tuple(not succ[k] for k in order)
    return MorseDecomposition(bmg, tuple(sets), morse_of, is_sink, arcs)


def morse_dot(md: MorseDecomposition, name: str = "morse") -> str:
    lines = [f"digraph {name} {{"]
    for k, boxes in enumerate(md.morse_sets):
        style = ', style=filled, fillcolor="grey"' if md.is_sink[k] else ""
        lines.append(f'  M{k} [label="M{k} ({len(boxes)} boxes)"{style}];')
    for a, b in sorted(md.arcs):
        lines.append(f"  M{a} -> M{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reports


def content_boxes(cover: BoxCover, rg, nodes: Sequence[int]) -> np.ndarray:
    """Boxes whose closure meets the content of ``nodes``."""
    c = content(rg, nodes)
    out = set()
    for face in c.boxes:
        per = [np.flatnonzero(cells.face_mask(sorted(t))) for cells, t in zip(cover.cells, face.strategies)]
        out.update(_product_ids(per, cover.shape).tolist())
    return np.array(sorted(out), dtype=np.int64)


def _face_point(cells: SimplexCells, cell: int, face: Sequence[int]) -> np.ndarray:
    a = cells.floors[cell]
    lo = np.zeros(cells.n)
    hi = np.zeros(cells.n)
    idx = list(face)
    lo[idx] = a[idx] / cells.kappa
    hi[idx] = (a[idx] + 1) / cells.kappa
    width = hi.sum() - lo.sum()
    return lo + (1.0 - lo.sum()) * (hi - lo) / width if width > 0 else lo


def content_containment_check(g: Game, H: Sequence[int], md: MorseDecomposition, rg=None) -> str:
    """Is every box touching content(H) in the Morse set holding H's vertices?

    A missing box is a violation only when the content point picked inside it
    is covered by no box of that Morse set; otherwise the gap is blamed on the
    resolution.
    """
    rg = rg if rg is not None else build_response_graph(g)
    cover = md.graph.cover
    target = _assigned_morse_set(cover, rg, H, md)
    if target is None:
        return UNRESOLVED
    boxes = content_boxes(cover, rg, H)
    missing = boxes[md.morse_of[boxes] != target]
    if missing.size == 0:
        return HOLDS
    faces = content(rg, H).boxes
    for b in missing.tolist():
        cells = cover.box_cells(b)
        for face in faces:
            if not all(cover.cells[p].face_mask(sorted(t))[c] for p, (c, t) in enumerate(zip(cells, face.strategies))):
                continue
            pt = np.concatenate([_face_point(cover.cells[p], c, sorted(t)) for p, (c, t) in enumerate(zip(cells, face.strategies))])
            if not np.any(md.morse_of[cover.boxes_containing(pt)] == target):
                return VIOLATED
    return UNRESOLVED


def _assigned_morse_set(cover: BoxCover, rg, H: Sequence[int], md: MorseDecomposition) -> Optional[int]:
    ids = {int(md.morse_of[cover.vertex_box(rg.profile(v))]) for v in H}
    if len(ids) != 1:
        return None
    (k,) = ids
    return k if k >= 0 and md.is_sink[k] else None


@dataclass(frozen=True)
class ChainReport:
    game: str
    shape: tuple[int, ...]
    resolution: dict
    morse_sets: tuple[tuple[int, ...], ...]
    sink_morse_sets: tuple[int, ...]
    morse_arcs: tuple[tuple[int, int], ...]
    correspondence: tuple[dict, ...]
    content_coverage: tuple[dict, ...]
    sink_sccs: int
    conjecture1: str
    conjecture2: str
    timing: dict = field(default_factory=dict, compare=False)

    @property
    def verdicts(self) -> list[str]:
        out = [c["verdict"] for c in self.correspondence]
        out += [c["verdict"] for c in self.content_coverage]
        return out + [self.conjecture1, self.conjecture2]

    @property
    def any_violated(self) -> bool:
        return VIOLATED in self.verdicts

    def to_dict(self, with_timing: bool = True) -> dict:
        data = {
            "game": self.game,
            "shape": list(self.shape),
            "resolution": self.resolution,
            "morse_sets": [list(m) for m in self.morse_sets],
            "sinks": list(self.sink_morse_sets),
            "morse_arcs": [list(a) for a in self.morse_arcs],
            "correspondence": list(self.correspondence),
            "content_coverage": list(self.content_coverage),
            "counts": {"sink_sccs": self.sink_sccs, "sink_morse_sets": len(self.sink_morse_sets)},
            "conjecture1": self.conjecture1,
            "conjecture2": self.conjecture2,
        }
        if with_timing:
            data["timing"] = self.timing
        return data

    def to_json(self, with_timing: bool = True) -> str:
        return json.dumps(self.to_dict(with_timing), indent=1, sort_keys=True)


def sink_chain_estimate(
    g: Game, md: MorseDecomposition, scc: Optional[SCCDecomposition] = None, timing: Optional[dict] = None
) -> ChainReport:
    cover = md.graph.cover
    rg = build_response_graph(g)
    scc = scc if scc is not None else scc_decomposition(rg)
    sink_set = set(md.sinks)
    corr, cov = [], []
    hit_by: dict[int, list[int]] = {k: [] for k in md.sinks}
    for h, comp_id in enumerate(scc.sink_ids):
        H = scc.components[comp_id]
        vboxes = sorted({cover.vertex_box(rg.profile(v)) for v in H})
        owners = sorted({int(md.morse_of[b]) for b in vboxes})
        if len(owners) == 1 and owners[0] in sink_set:
            verdict, target = HOLDS, owners[0]
            hit_by[target].append(h)
        else:
            verdict, target = UNRESOLVED, None
        for o in owners:
            if o in hit_by and o != target:
                hit_by[o].append(h)
        corr.append({
            "sink_scc": h,
            "profiles": [list(rg.profile(v)) for v in H],
            "vertex_boxes": vboxes,
            "morse_sets": owners,
            "morse_set": target,
            "verdict": verdict,
        })
        cboxes = content_boxes(cover, rg, H)
        entry = {"sink_scc": h, "content_boxes": int(cboxes.size)}
        if target is None:
            entry.update(covered=None, morse_boxes=None, within_one_layer=None, verdict=UNRESOLVED)
        else:
            mset = md.morse_sets[target]
            covered = int(np.count_nonzero(md.morse_of[cboxes] == target))
            layer = box_layer(cover, cboxes)
            within = bool(np.all(np.isin(mset, layer)))
            entry.update(
                covered=covered,
                morse_boxes=int(mset.size),
                within_one_layer=within,
                verdict=content_containment_check(g, H, md, rg),
            )
        cov.append(entry)

    # one sink Morse set per sink component and nothing else
    if any(not hs for hs in hit_by.values()):
        conj1 = VIOLATED
    elif all(c["verdict"] == HOLDS for c in corr) and all(len(hs) == 1 for hs in hit_by.values()):
        conj1 = HOLDS
    else:
        conj1 = UNRESOLVED

    if any(c["verdict"] == VIOLATED for c in cov):
        conj2 = VIOLATED
    elif all(c["verdict"] == HOLDS and c["within_one_layer"] for c in cov) and conj1 == HOLDS:
        conj2 = HOLDS
    else:
        conj2 = UNRESOLVED

    bmg = md.graph
    resolution = {
        "kappa": cover.kappa,
        "T": bmg.T,
        "delta": cover.delta,
        "rho": bmg.rho,
        "m": bmg.m,
        "dt": bmg.dt,
        "seed": bmg.seed,
        "epsilon": cover.delta + bmg.rho,
        "boxes": cover.num_boxes,
        "arcs": bmg.num_arcs,
    }
    return ChainReport(
        game=g.name,
        shape=g.strategy_counts,
        resolution=resolution,
        morse_sets=tuple(tuple(int(b) for b in m) for m in md.morse_sets),
        sink_morse_sets=tuple(md.sinks),
        morse_arcs=tuple(sorted(md.arcs)),
        correspondence=tuple(corr),
        content_coverage=tuple(cov),
        sink_sccs=len(scc.sink_ids),
        conjecture1=conj1,
        conjecture2=conj2,
        timing=dict(timing or {}),
    )


def analyze_chain(
    g: Game,
    kappa: Optional[int] = None,
    T: float = 1.0,
    n_random: int = 8,
    rho: Optional[float] = None,
    dt: float = 0.01,
    seed: int = 0,
    budget: int = DEFAULT_BOX_BUDGET,
) -> tuple[ChainReport, MorseDecomposition]:
    kappa = default_kappa(g.strategy_counts) if kappa is None else kappa
    t0 = time.perf_counter()
    cover = build_cover(g, kappa, budget)
    bmg = box_map(g, cover, T, n_random, rho, dt, seed)
    t1 = time.perf_counter()
    md = morse_decomposition(bmg)
    t2 = time.perf_counter()
    report = sink_chain_estimate(g, md, timing={})
    t3 = time.perf_counter()
    timing = {"box_map_s": round(t1 - t0, 3), "morse_s": round(t2 - t1, 3), "report_s": round(t3 - t2, 3)}
    object.__setattr__(report, "timing", timing)
    return report, md


def refinement_ladder(kappa: int, times: Sequence[float] = (1.0, 4.0, 10.0)) -> list[tuple[int, float]]:
    """(kappa, T) pairs: longer flow times first, then one doubling of kappa."""
    return [(kappa, float(t)) for t in times] + [(2 * kappa, float(times[-1]))]


def analyze_chain_refined(
    g: Game,
    ladder: Optional[Sequence[tuple[int, float]]] = None,
    budget: int = DEFAULT_BOX_BUDGET,
    max_boxes: Optional[int] = None,
    **kwargs,
) -> tuple[ChainReport, MorseDecomposition]:
    """Climb the ladder until the correspondence verdict is resolved.

    Sinks whose basins are thinner than a box, or that need many box layers
    to separate, merge at coarse settings; longer T and smaller boxes split
    them.  Rungs with more than ``max_boxes`` boxes are skipped (the first
    rung always runs).  The last result is returned if nothing resolves.
    """
    counts = g.strategy_counts
    ladder = list(ladder or refinement_ladder(default_kappa(counts)))
    if max_boxes is not None:
        size = lambda k: math.prod(simplex_cell_count(n, k) for n in counts)  # noqa: E731
        ladder = ladder[:1] + [r for r in ladder[1:] if size(r[0]) <= max_boxes]
    for kappa, T in ladder:
        report, md = analyze_chain(g, kappa, T, budget=budget, **kwargs)
        if report.conjecture1 != UNRESOLVED:
            break
    return report, md


# ---------------------------------------------------------------------------
# Explicit (epsilon, T)-chains


@dataclass(frozen=True)
class ChainWitness:
    points: tuple[np.ndarray, ...]
    times: tuple[float, ...]
    jumps: tuple[float, ...]  # |phi(x_i, t_i) - x_{i+1}|_inf
    epsilon: float
    kappa: int

    def __len__(self) -> int:
        return len(self.points)


def epsilon_chain_witness(
    g: Game,
    x,
    y,
    eps: float,
    T: float = 1.0,
    max_steps: int = 100_000,
    dt: float = 0.01,
    budget: int = DEFAULT_BOX_BUDGET,
) -> Optional[ChainWitness]:
    """Breadth-first search for an (eps, T)-chain from ``x`` to ``y``.

    Intermediate points are box centres at a resolution fine enough that a
    centre lies within eps/2 of every point of its box.  Returns None when the
    search exhausts every reachable box without getting within eps of ``y``.
    """
    if not eps > 0 or not T > 0:
        raise ValueError("eps and T must be positive")
    x = as_mixed(g, x).flat
    y = as_mixed(g, y).flat
    kappa = int(math.ceil(4.0 / eps))
    cover = build_cover(g, kappa, budget)
    reach = eps / 2
    start = ("start",)
    parent: dict = {start: None}
    rep: dict = {start: x}
    frontier = [start]
    expanded = 0
    while frontier:
        expanded += len(frontier)
        if expanded > max_steps:
            raise BudgetError(f"search exceeded {max_steps} expansions at kappa={kappa}; try a larger eps")
        pts = np.array([rep[k] for k in frontier])
        imgs = flow_batch(g, pts, T, dt)
        nxt = []
        for key, img in zip(frontier, imgs):
            gap = float(np.max(np.abs(img - y)))
            if gap < eps:
                return _assemble_witness(g, key, parent, rep, y, T, dt, eps, kappa)
            for b in cover.boxes_near(img, 0.0).tolist() + _center_boxes(cover, img, reach):
                if b in parent:
                    continue
                parent[b] = key
                rep[b] = cover.box_center(b)
                nxt.append(b)
        frontier = nxt
    return None


def _center_boxes(cover: BoxCover, img: np.ndarray, reach: float) -> list[int]:
    per = []
    for cells, z in zip(cover.cells, cover.split(img)):
        per.append(np.flatnonzero(np.max(np.abs(cells.centers - z), axis=1) < reach))
    return _product_ids(per, cover.shape).tolist()


def _assemble_witness(g, key, parent, rep, y, T, dt, eps, kappa) -> ChainWitness:
    path = []
    while key is not None:
        path.append(key)
        key = parent[key]
    path.reverse()
    points = [rep[k] for k in path] + [y]
    imgs = flow_batch(g, np.array(points[:-1]), T, dt)
    jumps = tuple(float(np.max(np.abs(a - b))) for a, b in zip(imgs, points[1:]))
    return ChainWitness(tuple(points), (T,) * len(jumps), jumps, eps, kappa)


# ---------------------------------------------------------------------------
# Conjecture scan


@dataclass(frozen=True)
class ScanReport:
    shape: tuple[int, ...]
    count: int
    seed: int
    kappa: int
    T: float
    conjecture1: dict
    conjecture2: dict
    violated: tuple[dict, ...]  # {"index", "game": json text, "verdicts"}
    kind: str = "uniform"

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "count": self.count,
            "seed": self.seed,
            "kappa": self.kappa,
            "T": self.T,
            "kind": self.kind,
            "conjecture1": self.conjecture1,
            "conjecture2": self.conjecture2,
            "violated": [{"index": v["index"], "verdicts": v["verdicts"]} for v in self.violated],
        }


def scan_games(shape: Sequence[int], count: int, seed: int, kind: str = "uniform") -> list[Game]:
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**62, size=count)
    return [random_strict_game(shape, int(s), kind) for s in seeds]


def conjecture_scan(
    shape: Sequence[int],
    count: int,
    seed: int,
    kappa: Optional[int] = None,
    T: float = 1.0,
    kind: str = "uniform",
    budget: int = DEFAULT_BOX_BUDGET,
) -> ScanReport:
    shape = tuple(int(s) for s in shape)
    kappa = default_kappa(shape) if kappa is None else kappa
    tallies = [{HOLDS: 0, VIOLATED: 0, UNRESOLVED: 0} for _ in range(2)]
    violated = []
    for i, g in enumerate(scan_games(shape, count, seed, kind)):
        report, _ = analyze_chain(g, kappa, T, seed=seed, budget=budget)
        tallies[0][report.conjecture1] += 1
        tallies[1][report.conjecture2] += 1
        if report.any_violated:
            violated.append({"index": i, "game": dump_game(g), "verdicts": report.verdicts})
    return ScanReport(shape, count, seed, kappa, T, tallies[0], tallies[1], tuple(violated), kind)
