"""Smoothed-aggregation hierarchy setup and V-cycle application."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.sparse as sp

from .aggregation import Aggregation, aggregate, tentative_prolongator
from .lumping import filter_matrix
from .sparse import DenseLU, csr, galerkin_product, signed_dominant_eig
from .strength import DropConfig, build_strength

__all__ = [
    "Smoother",
    "Level",
    "Hierarchy",
    "smooth_prolongator",
    "coarse_coordinates",
    "build_hierarchy",
    "vcycle",
    "as_preconditioner",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Smoother:
    """Relaxation used inside the V-cycle: ``"sgs"`` or damped ``"jacobi"``."""

    kind: str = "sgs"
    omega: float = 0.6
    sweeps: int = 1

    def __post_init__(self):
        if self.kind not in ("sgs", "jacobi"):
            raise ValueError(f"unknown smoother {self.kind!r}")


@dataclass
class Level:
    A: sp.csr_matrix
    P: sp.csr_matrix | None = None
    A_filtered: sp.csr_matrix | None = None
    coords: np.ndarray | None = None
    omega: float | None = None
    rho: float | None = None
    n_aggregates: int | None = None
    flagged_rows: int = 0
    diag: np.ndarray | None = None

    def __post_init__(self):
        self.diag = self.A.diagonal()


@dataclass
class Hierarchy:
    levels: list
    smoother: Smoother = field(default_factory=Smoother)
    stop_reason: str = ""
    coarse_solver: DenseLU | None = None
    coarse_cap: int = 5000

    def __post_init__(self):
        for a, b in zip(self.levels[:-1], self.levels[1:]):
            if a.P is None or a.P.shape != (a.A.shape[0], b.A.shape[0]):
                raise ValueError("inconsistent prolongator dimensions")
        if self.coarse_solver is None:
            self.coarse_solver = DenseLU(self.levels[-1].A, max_rows=self.coarse_cap)

    @property
    def operator_complexity(self) -> float:
        return sum(L.A.nnz for L in self.levels) / self.levels[0].A.nnz

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def summary_rows(self) -> list:
        return [
            dict(level=i, rows=L.A.shape[0], nnz=L.A.nnz,
                 aggregates="" if L.n_aggregates is None else L.n_aggregates,
                 omega="" if L.omega is None else f"{L.omega:.6g}",
                 flagged=L.flagged_rows)
            for i, L in enumerate(self.levels)
        ]

    def summary_text(self) -> str:
        lines = [f"{'level':>5} {'rows':>9} {'nnz':>10} {'aggs':>8} {'omega':>10} {'flagged':>7}"]
        for r in self.summary_rows():
            lines.append(f"{r['level']:>5} {r['rows']:>9} {r['nnz']:>10} {r['aggregates']!s:>8} "
                         f"{r['omega']!s:>10} {r['flagged']:>7}")
        lines.append(f"operator complexity {self.operator_complexity:.4f}; stop: {self.stop_reason}")
        return "\n".join(lines)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["level", "rows", "nnz", "aggregates", "omega", "flagged"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(self.summary_rows())
        return buf.getvalue()


def smooth_prolongator(A_filtered: sp.csr_matrix, P_t: sp.csr_matrix):
    """Damped-Jacobi smoothing ``P = (I - omega Dt^{-1} At) P_t``.

    Returns ``(P, omega, rho)`` with ``omega = 4 / (3 rho)``.
    """
    d = A_filtered.diagonal()
    zero = np.flatnonzero(d == 0.0)
    if len(zero):
        raise ZeroDivisionError(f"zero diagonal in filtered matrix rows {zero[:10].tolist()}"
                                + (" ..." if len(zero) > 10 else ""))
    rho = signed_dominant_eig(A_filtered, d)
    if rho == 0.0:
        raise ZeroDivisionError("dominant eigenvalue estimate is zero")
    if rho < 0:
        log.warning("negative spectral estimate %.4g; damping used as-is", rho)
    omega = 4.0 / (3.0 * rho)
    DinvA = sp.diags(1.0 / d) @ A_filtered
    P = csr(P_t - omega * (DinvA @ P_t))
    return P, omega, rho


def coarse_coordinates(agg: Aggregation, coords: np.ndarray) -> np.ndarray:
    """Centroid of each aggregate's member coordinates."""
    coords = np.asarray(coords, dtype=np.float64)
    counts = np.bincount(agg.assignment, minlength=agg.n_aggregates).astype(np.float64)
    out = np.empty((agg.n_aggregates, coords.shape[1]))
    for d in range(coords.shape[1]):
        out[:, d] = np.bincount(agg.assignment, weights=coords[:, d], minlength=agg.n_aggregates) / counts
    return out


def build_hierarchy(A, coords, cfg: DropConfig, *, max_coarse: int = 1000, max_levels: int = 20,
                    stall_ratio: float = 0.95, smoother: Smoother | None = None,
                    coarse_cap: int = 5000) -> Hierarchy:
    """Recursive SA setup until the operator has fewer than ``max_coarse`` rows.

    Setup also stops at ``max_levels`` levels or when an aggregation step
    would keep more than ``stall_ratio`` of the rows; the reason is stored
    in ``Hierarchy.stop_reason``.
    """
    A = csr(A)
    levels = [Level(A, coords=None if coords is None else np.asarray(coords, dtype=np.float64))]
    reason = "coarse size"
    while True:
        L = levels[-1]
        n = L.A.shape[0]
        if n < max_coarse:
            reason = "coarse size"
            break
        if len(levels) >= max_levels:
            reason = "level cap"
            break
        G = build_strength(L.A, L.coords, cfg)
        F = filter_matrix(L.A, G, cfg.lumping)
        agg = aggregate(G)
        if agg.n_aggregates / n > stall_ratio:
            reason = f"stall ({agg.n_aggregates}/{n})"
            break
        P, omega, rho = smooth_prolongator(F.A, tentative_prolongator(agg))
        L.P, L.A_filtered, L.omega, L.rho = P, F.A, omega, rho
        L.n_aggregates = agg.n_aggregates
        L.flagged_rows = len(F.nonpositive_diag)
        Ac = galerkin_product(P, L.A)
        cc = None if L.coords is None else coarse_coordinates(agg, L.coords)
        levels.append(Level(Ac, coords=cc))
    return Hierarchy(levels, smoother or Smoother("sgs"), reason, coarse_cap=coarse_cap)


@nb.njit(cache=True)
def _gauss_seidel(indptr, indices, data, diag, x, b, forward):
    n = len(b)
    start, stop, step = (0, n, 1) if forward else (n - 1, -1, -1)
    for i in range(start, stop, step):
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                s -= data[k] * x[j]
        x[i] = s / diag[i]


def _relax(L: Level, sm: Smoother, x, b):
    A = L.A
    for _ in range(sm.sweeps):
        if sm.kind == "jacobi":
            x += sm.omega * (b - A @ x) / L.diag
        else:
            _gauss_seidel(A.indptr, A.indices, A.data, L.diag, x, b, True)
            _gauss_seidel(A.indptr, A.indices, A.data, L.diag, x, b, False)
    return x


def vcycle(H: Hierarchy, b: np.ndarray, x: np.ndarray | None = None, level: int = 0) -> np.ndarray:
    """One V(1,1) cycle on ``A_level x = b``."""
    if level == H.n_levels - 1:
        return H.coarse_solver.solve(b)
    L = H.levels[level]
    x = np.zeros_like(b) if x is None else np.array(x, dtype=np.float64)
    x = _relax(L, H.smoother, x, b)
    r = b - L.A @ x
    e = vcycle(H, L.P.T @ r, None, level + 1)
    x += L.P @ e
    return _relax(L, H.smoother, x, b)


def as_preconditioner(H: Hierarchy):
    """The V-cycle from a zero guess, as a linear map ``r -> M^{-1} r``."""
    return lambda r: vcycle(H, np.asarray(r, dtype=np.float64))
