"""Strongly connected components and condensations of small-to-medium digraphs.

Graphs are given in CSR form: successors of node ``v`` are
``indices[indptr[v]:indptr[v + 1]]``.
"""

from __future__ import annotations

from graphlib import CycleError, TopologicalSorter
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


def csr_from_lists(succ: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(succ) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(s) for s in succ])
    indices = np.fromiter((w for s in succ for w in s), dtype=np.int64, count=int(indptr[-1]))
    return indptr, indices


def csr_from_arcs(n: int, tails: np.ndarray, heads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR arrays from arc lists; duplicate arcs are removed, heads sorted."""
    key = np.unique(np.asarray(tails, dtype=np.int64) * n + np.asarray(heads, dtype=np.int64))
    tails, heads = np.divmod(key, n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, tails + 1, 1)
    return np.cumsum(indptr), heads


def strong_components(n: int, indptr: np.ndarray, indices: np.ndarray) -> list[list[int]]:
    """Strongly connected components, sinks first.

    Every arc between components points from a later one to an earlier one.
    Nodes inside a component are sorted.
    """
    if n == 0:
        return []
    mat = csr_matrix((np.ones(indices.size, dtype=np.int8), indices, indptr), shape=(n, n))
    k, label = connected_components(mat, directed=True, connection="strong")
    tails = np.repeat(np.arange(n), np.diff(indptr))
    a, b = label[tails], label[indices]
    mask = a != b
    succ: dict[int, set[int]] = {c: set() for c in range(k)}
    for x, y in zip(a[mask].tolist(), b[mask].tolist()):
        succ[x].add(y)
    # graphlib emits a node after everything it maps to, here its successors
    order = list(TopologicalSorter(succ).static_order())
    members = np.argsort(label, kind="stable")
    bounds = np.searchsorted(label[members], np.arange(k + 1))
    return [members[bounds[c]:bounds[c + 1]].tolist() for c in order]


def condensation(
    n: int, indptr: np.ndarray, indices: np.ndarray, comps: Sequence[Sequence[int]]
) -> tuple[np.ndarray, set[tuple[int, int]]]:
    """Component label per node and the set of arcs between distinct components."""
    label = np.empty(n, dtype=np.int64)
    for k, comp in enumerate(comps):
        label[list(comp)] = k
    tails = np.repeat(np.arange(n), np.diff(indptr))
    a, b = label[tails], label[indices]
    mask = a != b
    arcs = set(zip(a[mask].tolist(), b[mask].tolist()))
    return label, arcs


def has_self_loop(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    n = len(indptr) - 1
    tails = np.repeat(np.arange(n), np.diff(indptr))
    out = np.zeros(n, dtype=bool)
    out[tails[tails == indices]] = True
    return out


def is_acyclic(n: int, succ: Sequence[Sequence[int]]) -> bool:
    try:
        topological_order(n, succ)
    except ValueError:
        return False
    return True


def topological_order(n: int, succ: Sequence[Sequence[int]]) -> list[int]:
    """Nodes ordered so that every arc points forward."""
    preds: dict[int, set[int]] = {v: set() for v in range(n)}
    for v, s in enumerate(succ):
        for w in s:
            preds[w].add(v)
    try:
        return list(TopologicalSorter(preds).static_order())
    except CycleError:
        raise ValueError("graph has a directed cycle") from None
