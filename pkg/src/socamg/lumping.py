"""Filtered matrix construction with diagonal or distributed lumping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .sparse import csr
from .strength import StrengthGraph

__all__ = [
    "FilteredMatrix",
    "ScalingReport",
    "filter_diagonal_lump",
    "filter_distributed_lump",
    "filter_matrix",
    "verify_scaling_factors",
]


@dataclass
class FilteredMatrix:
    """Filtered matrix plus per-row dropped sums and diagnostic flags.

    Attributes
    ----------
    A : csr_matrix
        Filtered matrix; the diagonal is always structurally present.
    dropped : ndarray
        Sum of the dropped off-diagonal entries of each row.
    nonpositive_diag : ndarray
        Rows whose filtered diagonal is <= 0.
    sign_flipped : ndarray
        Rows whose diagonal changed sign relative to the original.
    no_offdiag : ndarray
        Rows with a negative dropped sum but no retained off-diagonal; these
        fall back to diagonal lumping.
    """

    A: sp.csr_matrix
    dropped: np.ndarray
    nonpositive_diag: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    sign_flipped: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    no_offdiag: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def _split(A: sp.csr_matrix, G: StrengthGraph):
    """Triplets of ``A`` tagged diagonal / retained off-diagonal / dropped."""
    if A.shape[0] != A.shape[1]:
        raise ValueError("filtering requires a square matrix")
    if G.n != A.shape[0]:
        raise ValueError(f"strength graph has {G.n} rows, matrix {A.shape[0]}")
    coo = A.tocoo()
    r, c, v = coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
    diag = r == c
    n = A.shape[0]
    # membership of (r, c) in the strength pattern via keyed search
    gcoo = G.G.tocoo()
    gkeys = np.sort(gcoo.row.astype(np.int64) * n + gcoo.col)
    keys = r * n + c
    if len(gkeys):
        pos = np.minimum(np.searchsorted(gkeys, keys), len(gkeys) - 1)
        strong = gkeys[pos] == keys
    else:
        strong = np.zeros(len(keys), dtype=bool)
    keep = diag | strong
    return n, r, c, v, diag, keep


def _finish(n, r, c, v, d_orig, dropped, no_offdiag=None):
    # ensure every diagonal is materialized
    ar = np.arange(n)
    F = csr((np.concatenate([v, np.zeros(n)]), (np.concatenate([r, ar]), np.concatenate([c, ar]))),
            shape=(n, n))
    d = F.diagonal()
    return FilteredMatrix(
        F, dropped,
        nonpositive_diag=np.flatnonzero(d <= 0),
        sign_flipped=np.flatnonzero(np.sign(d) != np.sign(d_orig)),
        no_offdiag=np.empty(0, np.int64) if no_offdiag is None else no_offdiag,
    )


def filter_diagonal_lump(A: sp.csr_matrix, G: StrengthGraph) -> FilteredMatrix:
    """Keep strong entries and add each row's dropped sum to its diagonal."""
    n, r, c, v, diag, keep = _split(A, G)
    dropped = np.bincount(r[~keep], weights=v[~keep], minlength=n)
    d_orig = A.diagonal()
    ar = np.arange(n)
    rr = np.concatenate([r[keep], ar])
    cc = np.concatenate([c[keep], ar])
    vv = np.concatenate([v[keep], dropped])
    return _finish(n, rr, cc, vv, d_orig, dropped)


def filter_distributed_lump(A: sp.csr_matrix, G: StrengthGraph) -> FilteredMatrix:
    """Distributed lumping.

    Rows whose dropped sum ``e_i`` is non-negative use diagonal lumping. For
    ``e_i < 0`` every retained entry, diagonal included, becomes
    ``a_ij + e_i |a_ij| / sum_k |a_ik|`` over the retained entries, which
    preserves the row sum and, under the usual hypotheses, every sign.
    """
    n, r, c, v, diag, keep = _split(A, G)
    dropped = np.bincount(r[~keep], weights=v[~keep], minlength=n)
    d_orig = A.diagonal()
    rk, ck, vk = r[keep], c[keep], v[keep]
    has_off = np.bincount(rk[rk != ck], minlength=n) > 0
    neg = dropped < 0
    # rows without retained off-diagonals fall back to diagonal lumping
    distribute = neg & has_off
    absum = np.bincount(rk, weights=np.abs(vk), minlength=n)
    bad = np.flatnonzero(distribute & (absum == 0))
    if len(bad):
        raise ValueError(f"row {bad[0]} has negative dropped sum but no retained magnitude")
    on = distribute[rk]
    out = vk.copy()
    out[on] += dropped[rk[on]] * np.abs(vk[on]) / absum[rk[on]]
    ar = np.arange(n)
    lump = np.where(distribute, 0.0, dropped)
    rr = np.concatenate([rk, ar])
    cc = np.concatenate([ck, ar])
    vv = np.concatenate([out, lump])
    return _finish(n, rr, cc, vv, d_orig, dropped, np.flatnonzero(neg & ~has_off))


def filter_matrix(A, G, lumping: str = "distributed") -> FilteredMatrix:
    if lumping == "diagonal":
        return filter_diagonal_lump(A, G)
    if lumping == "distributed":
        return filter_distributed_lump(A, G)
    raise ValueError(f"unknown lumping {lumping!r}")


@dataclass
class ScalingReport:
    rows: np.ndarray
    factors: np.ndarray
    positive_ok: bool
    negative_ok: bool

    @property
    def ok(self) -> bool:
        return self.positive_ok and self.negative_ok and bool(np.all(self.factors > 1.0))


def verify_scaling_factors(A: sp.csr_matrix, F: FilteredMatrix, rtol: float = 1e-12) -> ScalingReport:
    """Check how distributed lumping rescales the Jacobi-scaled row entries.

    On rows with ``e_i < 0`` and a retained off-diagonal, positive entries of
    ``D^{-1} A`` must be unchanged in ``Dt^{-1} At`` while negative ones grow
    by ``(1 - e/s) / (1 + e/s)`` with ``s`` the retained absolute row sum.
    """
    At = F.A
    Acsr, Fcsr = csr(A), csr(At)
    d, dt = Acsr.diagonal(), Fcsr.diagonal()
    rows = np.flatnonzero(F.dropped < 0)
    rows = rows[~np.isin(rows, F.no_offdiag)]
    factors = np.empty(len(rows))
    pos_ok = neg_ok = True
    for t, i in enumerate(rows):
        cols = Fcsr.indices[Fcsr.indptr[i]:Fcsr.indptr[i + 1]]
        vals_t = Fcsr.data[Fcsr.indptr[i]:Fcsr.indptr[i + 1]]
        vals = np.asarray(Acsr[i, cols].todense()).ravel()
        s = np.abs(vals).sum()
        e = F.dropped[i]
        factor = (1.0 - e / s) / (1.0 + e / s)
        factors[t] = factor
        off = cols != i
        a_s, t_s = vals[off] / d[i], vals_t[off] / dt[i]
        p, m = a_s > 0, a_s < 0
        pos_ok &= bool(np.allclose(t_s[p], a_s[p], rtol=rtol, atol=0))
        neg_ok &= bool(np.allclose(t_s[m], factor * a_s[m], rtol=rtol, atol=0))
    return ScalingReport(rows, factors, pos_ok, neg_ok)
