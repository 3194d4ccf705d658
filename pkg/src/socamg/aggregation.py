"""Greedy three-phase aggregation and the tentative prolongator."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .sparse import csr
from .strength import StrengthGraph

__all__ = ["Aggregation", "aggregate", "tentative_prolongator", "write_aggregates"]

UNASSIGNED = -1


@dataclass
class Aggregation:
    assignment: np.ndarray
    roots: np.ndarray

    @property
    def n_fine(self) -> int:
        return len(self.assignment)

    @property
    def n_aggregates(self) -> int:
        return len(self.roots)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def sets(self) -> list:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.n_aggregates + 1))
        return [set(order[bounds[k]:bounds[k + 1]].tolist()) for k in range(self.n_aggregates)]


@nb.njit(cache=True)
def _phases_1_2(n, g_ptr, g_idx, u_ptr, u_idx, u_w, order):
    agg = np.full(n, -1, dtype=np.int64)
    roots = np.empty(n, dtype=np.int64)
    nagg = 0
    # phase 1: roots whose whole neighborhood is still free
    for t in range(n):
        i = order[t]
        if agg[i] >= 0 or u_ptr[i + 1] == u_ptr[i]:
            continue
        free = True
        for k in range(u_ptr[i], u_ptr[i + 1]):
            if agg[u_idx[k]] >= 0:
                free = False
                break
        if not free:
            continue
        agg[i] = nagg
        for k in range(g_ptr[i], g_ptr[i + 1]):
            j = g_idx[k]
            if agg[j] < 0:
                agg[j] = nagg
        roots[nagg] = i
        nagg += 1
    # phase 2: attach to the most connected phase-1 aggregate
    phase1 = agg.copy()
    counts = np.zeros(nagg, dtype=np.int64)
    for t in range(n):
        i = order[t]
        if phase1[i] >= 0:
            continue
        best, best_count = -1, 0
        for k in range(u_ptr[i], u_ptr[i + 1]):
            a = phase1[u_idx[k]]
            if a >= 0:
                counts[a] += u_w[k]
        for k in range(u_ptr[i], u_ptr[i + 1]):
            a = phase1[u_idx[k]]
            if a >= 0:
                c = counts[a]
                if c > best_count or (c == best_count and a < best):
                    best, best_count = a, c
        for k in range(u_ptr[i], u_ptr[i + 1]):
            a = phase1[u_idx[k]]
            if a >= 0:
                counts[a] = 0
        if best >= 0:
            agg[i] = best
    return agg, roots[:nagg].copy()


def aggregate(G: StrengthGraph, order: np.ndarray | None = None) -> Aggregation:
    """Partition the vertices of ``G`` into aggregates.

    Phase 1 scans vertices in ``order`` (ascending index by default) and makes
    a vertex a root when none of its strong neighbours, in either direction,
    is aggregated; the root takes its unassigned strong out-neighbours.
    Phase 2 attaches each leftover vertex to the adjacent phase-1 aggregate
    with the most connections (both directions counted, ties to the lowest
    id). Phase 3 groups what remains into connected clusters, isolated
    vertices becoming singletons.
    """
    n = G.n
    if n == 0:
        raise ValueError("empty strength graph")
    order = np.arange(n, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("order must be a permutation of the vertices")
    Gp = G.G.tocsr()
    Gp.sort_indices()
    B = sp.csr_matrix((np.ones(Gp.nnz), Gp.indices, Gp.indptr), shape=Gp.shape)
    U = (B + B.T).tocsr()
    U.sort_indices()
    agg, roots = _phases_1_2(n, Gp.indptr.astype(np.int64), Gp.indices.astype(np.int64),
                             U.indptr.astype(np.int64), U.indices.astype(np.int64),
                             U.data.astype(np.int64), order)
    rest = np.flatnonzero(agg < 0)
    if len(rest):
        sub = U[rest][:, rest]
        _, labels = connected_components(sub, directed=False)
        # number new clusters by first appearance in the scan order
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        first = np.full(labels.max() + 1, n, dtype=np.int64)
        np.minimum.at(first, labels, rank[rest])
        relabel = np.empty_like(first)
        relabel[np.argsort(first, kind="stable")] = np.arange(len(first))
        nagg = len(roots)
        agg[rest] = nagg + relabel[labels]
        roots = np.concatenate([roots, order[np.sort(first)]])
    return Aggregation(agg, roots)


def tentative_prolongator(agg: Aggregation) -> sp.csr_matrix:
    """Boolean aggregate-membership matrix, one unit entry per row."""
    a = agg.assignment
    if np.any(a < 0):
        raise ValueError(f"vertex {np.flatnonzero(a < 0)[0]} is unassigned")
    n = len(a)
    return csr((np.ones(n), (np.arange(n), a)), shape=(n, agg.n_aggregates))


def write_aggregates(path, agg: Aggregation) -> None:
    np.savetxt(path, agg.assignment, fmt="%d")
