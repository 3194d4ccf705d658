"""Strength of connection: SOC matrix, scaling, and strong/weak classification.

A strength graph is stored as a CSR pattern of the retained off-diagonal
entries; the diagonal is always implicitly retained.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import csr

__all__ = [
    "ConfigError",
    "DropConfig",
    "ScaledEntries",
    "StrengthGraph",
    "soc_matrix",
    "scale_symmetric_sa",
    "scale_signed_classical",
    "scaled_entries",
    "classify_threshold",
    "classify_cut_drop",
    "build_strength",
]

_SOC = {"a": "A", "system": "A", "dlap": "DLap", "distance": "DLap"}
_SCALING = {"sa": "SA", "symmetric": "SA", "sgn": "Sgn", "signed": "Sgn"}
_CLASSIFIER = {"val": "Val", "threshold": "Val", "gap": "Gap", "cutdrop": "Gap"}
_LUMPING = {"diagonal": "diagonal", "diag": "diagonal",
            "distributed": "distributed", "distrib": "distributed"}


class ConfigError(ValueError):
    """Inconsistent or unknown dropping configuration."""


def _canon(table, value, what):
    try:
        return table[str(value).lower()]
    except KeyError:
        raise ConfigError(f"unknown {what} {value!r}; choose from {sorted(set(table.values()))}") from None


@dataclass(frozen=True)
class DropConfig:
    """Dropping pipeline: SOC matrix, scaling, classifier, thresholds, lumping."""

    soc: str = "DLap"
    scaling: str = "Sgn"
    classifier: str = "Val"
    theta: float = 0.16
    theta_gap: float = 0.5
    lumping: str = "distributed"

    def __post_init__(self):
        object.__setattr__(self, "soc", _canon(_SOC, self.soc, "SOC matrix"))
        object.__setattr__(self, "scaling", _canon(_SCALING, self.scaling, "scaling"))
        object.__setattr__(self, "classifier", _canon(_CLASSIFIER, self.classifier, "classifier"))
        object.__setattr__(self, "lumping", _canon(_LUMPING, self.lumping, "lumping"))
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if not 0.0 < self.theta_gap <= 1.0:
            raise ConfigError(f"theta_gap must lie in (0, 1], got {self.theta_gap}")
        if self.classifier == "Gap" and self.scaling != "SA":
            raise ConfigError("cut-drop classification requires symmetric SA scaling")

    @property
    def name(self) -> str:
        return f"{self.soc}/{self.scaling}/{self.classifier}"


@dataclass
class ScaledEntries:
    """Scaled off-diagonal values on the SOC pattern (diagonal excluded)."""

    V: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def row(self, i):
        lo, hi = self.V.indptr[i], self.V.indptr[i + 1]
        return self.V.indices[lo:hi], self.V.data[lo:hi]


@dataclass
class StrengthGraph:
    """Retained off-diagonal pattern; ``G[i, j] == 1`` iff edge i -> j is strong."""

    G: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def nnz(self) -> int:
        return self.G.nnz

    def row(self, i) -> np.ndarray:
        return self.G.indices[self.G.indptr[i]:self.G.indptr[i + 1]]

    def edges(self) -> set:
        coo = self.G.tocoo()
        return set(zip(coo.row.tolist(), coo.col.tolist()))

    def is_symmetric(self) -> bool:
        return (self.G != self.G.T).nnz == 0

    def write_edges(self, path) -> None:
        coo = self.G.tocoo()
        np.savetxt(path, np.column_stack([coo.row, coo.col]), fmt="%d")


def _offdiag_coo(S):
    coo = S.tocoo()
    off = coo.row != coo.col
    return coo.row[off], coo.col[off], coo.data[off]


def _pattern(rows, cols, vals, n):
    """CSR from triplets without dropping explicit zeros."""
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M.sum_duplicates()
    return M


def soc_matrix(A: sp.csr_matrix, coords: np.ndarray | None = None, kind: str = "A") -> sp.csr_matrix:
    """SOC matrix: ``A`` itself, or the distance Laplacian on ``A``'s pattern."""
    kind = _canon(_SOC, kind, "SOC matrix")
    if kind == "A":
        return A
    if coords is None:
        raise ValueError("the distance Laplacian needs vertex coordinates")
    coords = np.asarray(coords, dtype=np.float64)
    if len(coords) != A.shape[0]:
        raise ValueError(f"{len(coords)} coordinates for {A.shape[0]} rows")
    rows, cols, _ = _offdiag_coo(A)
    d2 = np.sum((coords[rows] - coords[cols]) ** 2, axis=1)
    zero = np.flatnonzero(d2 == 0.0)
    if len(zero):
        k = zero[0]
        raise ValueError(f"coincident coordinates for connected vertices {rows[k]} and {cols[k]}")
    vals = -1.0 / d2
    n = A.shape[0]
    diag = -np.bincount(rows, weights=vals, minlength=n)
    ar = np.arange(n)
    return csr((np.concatenate([vals, diag]), (np.concatenate([rows, ar]), np.concatenate([cols, ar]))),
               shape=(n, n))


def scale_symmetric_sa(S: sp.csr_matrix) -> ScaledEntries:
    """``v_ij = |S_ij| / sqrt(S_ii S_jj)``."""
    d = S.diagonal()
    rows, cols, vals = _offdiag_coo(S)
    involved = np.unique(np.concatenate([rows, cols]))
    bad = involved[d[involved] <= 0]
    if len(bad):
        raise ValueError(f"non-positive diagonal in row {bad[0]}: symmetric scaling needs S_ii > 0")
    v = np.abs(vals) / np.sqrt(d[rows] * d[cols])
    return ScaledEntries(_pattern(rows, cols, v, S.shape[0]))


def scale_signed_classical(S: sp.csr_matrix) -> ScaledEntries:
    """``v_ij = -S_ij / max_k(-S_ik)``; rows without a negative entry get ``-inf``."""
    n = S.shape[0]
    rows, cols, vals = _offdiag_coo(S)
    m = np.full(n, -np.inf)
    np.maximum.at(m, rows, -vals)
    mr = m[rows]
    v = np.full(len(vals), -np.inf)
    ok = mr > 0
    v[ok] = -vals[ok] / mr[ok]
    return ScaledEntries(_pattern(rows, cols, v, n))


def scaled_entries(S: sp.csr_matrix, scaling: str) -> sp.csr_matrix:
    scaling = _canon(_SCALING, scaling, "scaling")
    f = scale_symmetric_sa if scaling == "SA" else scale_signed_classical
    return f(S).V


def _graph(rows, cols, n):
    G = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    G.sum_duplicates()
    return StrengthGraph(G)


def classify_threshold(v: ScaledEntries, theta: float) -> StrengthGraph:
    """Edge ``(i, j)`` is strong iff ``v_ij >= theta``."""
    coo = v.V.tocoo()
    keep = coo.data >= theta
    return _graph(coo.row[keep], coo.col[keep], v.n)


def classify_cut_drop(v: ScaledEntries, theta_gap: float) -> StrengthGraph:
    """Per row keep the descending-sorted prefix up to the first relative gap.

    Entries are sorted by value (ties by ascending column). The largest is
    kept; each following entry is kept while ``v_k >= theta_gap * v_{k-1}``.
    """
    if not 0.0 < theta_gap <= 1.0:
        raise ValueError(f"theta_gap must lie in (0, 1], got {theta_gap}")
    coo = v.V.tocoo()
    if coo.nnz == 0:
        return _graph(coo.row, coo.col, v.n)
    order = np.lexsort((coo.col, -coo.data, coo.row))
    r, c, x = coo.row[order], coo.col[order], coo.data[order]
    first = np.ones(len(r), dtype=bool)
    first[1:] = r[1:] != r[:-1]
    gap = np.zeros(len(r), dtype=bool)
    gap[1:] = x[1:] < theta_gap * x[:-1]
    gap &= ~first
    # an entry survives iff no gap has occurred earlier in its row
    seen = np.cumsum(gap)
    row_start = np.maximum.accumulate(np.where(first, np.arange(len(r)), 0))
    base = seen[row_start] - gap[row_start]
    keep = (seen - base) == 0
    return _graph(r[keep], c[keep], v.n)


def build_strength(A: sp.csr_matrix, coords, cfg: DropConfig) -> StrengthGraph:
    S = soc_matrix(A, coords, cfg.soc)
    v = scale_symmetric_sa(S) if cfg.scaling == "SA" else scale_signed_classical(S)
    if cfg.classifier == "Gap":
        return classify_cut_drop(v, cfg.theta_gap)
    return classify_threshold(v, cfg.theta)
