"""Structured geometric multigrid with the semi-coarsening rule semi_abar.

The x and y axes coarsen at every transition. Any further axis coarsens
iff its current spacing is at most ``abar`` times the current x spacing.
Each coarsened axis keeps every third point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hierarchy import Hierarchy, Level, Smoother, as_preconditioner
from .krylov import SolveReport, pcg, random_rhs
from .mesh import DIRICHLET, MeshSpec, assemble, build_mesh
from .sparse import csr, galerkin_product

__all__ = ["GridPlan", "plan_semi_coarsening", "interpolation_1d",
           "multilinear_interpolation", "geo_hierarchy", "geo_solve"]


@dataclass
class GridPlan:
    points: list      # per level: tuple of points per axis
    spacings: list    # per level: tuple of spacing per axis
    masks: list       # per transition: tuple of bools, True if the axis coarsens


def plan_semi_coarsening(points, spacings, abar: float, n_levels: int) -> GridPlan:
    points, spacings = tuple(int(p) for p in points), tuple(float(h) for h in spacings)
    if len(points) != len(spacings):
        raise ValueError("points and spacings must have one entry per axis")
    plan = GridPlan([points], [spacings], [])
    for _ in range(n_levels - 1):
        pts, h = plan.points[-1], plan.spacings[-1]
        mask = tuple(a < 2 or h[a] <= abar * h[0] * (1 + 1e-12) for a in range(len(pts)))
        for a, m in enumerate(mask):
            if m and ((pts[a] - 1) % 3 or pts[a] < 4):
                raise ValueError(f"axis {a} with {pts[a]} points cannot be coarsened by 3")
        plan.masks.append(mask)
        plan.points.append(tuple((p - 1) // 3 + 1 if m else p for p, m in zip(pts, mask)))
        plan.spacings.append(tuple(3 * s if m else s for s, m in zip(h, mask)))
    return plan


def interpolation_1d(n_fine: int) -> sp.csr_matrix:
    """Linear interpolation from every third point: rows (1,0), (2/3,1/3), (1/3,2/3)."""
    if (n_fine - 1) % 3:
        raise ValueError(f"{n_fine} points is not of the form 3k + 1")
    nc = (n_fine - 1) // 3 + 1
    rows, cols, vals = [], [], []
    for i in range(n_fine):
        c, off = divmod(i, 3)
        if off == 0:
            rows.append(i), cols.append(c), vals.append(1.0)
        else:
            w = off / 3.0
            rows += [i, i]
            cols += [c, c + 1]
            vals += [1.0 - w, w]
    return csr((vals, (rows, cols)), shape=(n_fine, nc))


def multilinear_interpolation(fine_points, mask) -> sp.csr_matrix:
    """Tensor product of 1D interpolants (identity on uncoarsened axes), x fastest."""
    P = None
    for n, m in zip(fine_points, mask):
        Pa = interpolation_1d(n) if m else sp.identity(n, format="csr")
        P = Pa if P is None else sp.kron(Pa, P, format="csr")
    return csr(P)


def _kept_vertices(points, mask) -> np.ndarray:
    """Fine lattice indices of the coarse vertices (for Dirichlet bookkeeping)."""
    axes = [np.arange(0, n, 3) if m else np.arange(n) for n, m in zip(points, mask)]
    grids = np.meshgrid(*axes, indexing="ij")
    strides = np.cumprod((1,) + tuple(points[:-1]))
    return sum(g.ravel(order="F") * s for g, s in zip(grids, strides))


def geo_hierarchy(alpha: float, abar: float, n_levels: int = 4, n: int = 82,
                  smoother: Smoother | None = None):
    """Galerkin semi-coarsening hierarchy for the z-stretched 3D Poisson problem.

    Dirichlet conditions hold on every face except the two x = const planes.
    Returns the hierarchy, the assembled system and the grid plan.
    """
    widths = [np.ones(n - 1), np.ones(n - 1), np.full(n - 1, float(alpha))]
    bc = {f: DIRICHLET for f in ("ylo", "yhi", "zlo", "zhi")}
    mesh = build_mesh(MeshSpec(widths, bc))
    system = assemble(mesh)
    plan = plan_semi_coarsening((n, n, n), (1.0, 1.0, float(alpha)), abar, n_levels)

    free = system.free
    A = system.A
    levels = []
    for t, mask in enumerate(plan.masks):
        pts = plan.points[t]
        P_full = multilinear_interpolation(pts, mask)
        kept = _kept_vertices(pts, mask)
        # coarse vertex is free iff its fine counterpart is free
        is_free = np.zeros(int(np.prod(pts)), dtype=bool)
        is_free[free] = True
        coarse_free = np.flatnonzero(is_free[kept])
        P = csr(P_full[free][:, coarse_free])
        levels.append(Level(A, P=P))
        A = galerkin_product(P, A)
        free = coarse_free
    levels.append(Level(A))
    H = Hierarchy(levels, smoother or Smoother("jacobi", 0.6), "level cap")
    return H, system, plan


def geo_solve(alpha: float, abar: float, n_levels: int = 4, n: int = 82,
              smoother: Smoother | None = None, tol: float = 1e-10, maxit: int = 1000,
              seed: int | None = None) -> SolveReport:
    """PCG with the semi-coarsening V-cycle on a seeded random right-hand side."""
    H, system, _ = geo_hierarchy(alpha, abar, n_levels, n, smoother)
    b = random_rhs(system.A.shape[0]) if seed is None else random_rhs(system.A.shape[0], seed)
    return pcg(system.A, b, as_preconditioner(H), tol=tol, maxit=maxit,
               operator_complexity=H.operator_complexity)
