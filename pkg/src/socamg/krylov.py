"""Preconditioned CG and right-preconditioned restarted GMRES."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["IndefiniteError", "SolveReport", "pcg", "gmres", "random_rhs", "RHS_SEED"]

RHS_SEED = 20240801


class IndefiniteError(ArithmeticError):
    """CG met a non-positive curvature or preconditioned residual product."""


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    operator_complexity: float = 1.0
    x: np.ndarray | None = field(default=None, repr=False)

    @property
    def cost(self) -> float:
        return self.iterations * self.operator_complexity

    def csv_row(self) -> dict:
        return dict(iters=self.iterations, complexity=f"{self.operator_complexity:.6f}",
                    cost=f"{self.cost:.6f}" if self.converged else "",
                    status="converged" if self.converged else "maxit")


def random_rhs(n: int, seed: int = RHS_SEED) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, n)


def _identity(r):
    return r.copy()


def pcg(A, b, M=None, tol: float = 1e-10, maxit: int = 200, x0=None,
        operator_complexity: float = 1.0) -> SolveReport:
    """Preconditioned conjugate gradients.

    Convergence is declared when the true residual ``||b - A x||`` drops to
    ``tol`` times its initial value; it is recomputed every iteration.
    """
    M = M or _identity
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    r0 = np.linalg.norm(r)
    hist = [1.0]
    if r0 == 0.0:
        return SolveReport(0, True, hist, operator_complexity, x)
    z = M(r)
    rz = r @ z
    if rz <= 0:
        raise IndefiniteError("preconditioner is not positive definite at iteration 0")
    p = z.copy()
    for k in range(1, maxit + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise IndefiniteError(f"non-positive curvature p'Ap = {pAp:.3e} at iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(b - A @ x) / r0
        hist.append(rel)
        if rel <= tol:
            return SolveReport(k, True, hist, operator_complexity, x)
        z = M(r)
        rz_new = r @ z
        if rz_new <= 0:
            raise IndefiniteError(f"preconditioner is not positive definite at iteration {k}")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveReport(maxit, False, hist, operator_complexity, x)


def gmres(A, b, M=None, restart: int = 300, tol: float = 1e-6, maxit: int = 1000, x0=None,
          operator_complexity: float = 1.0) -> SolveReport:
    """Restarted GMRES with right preconditioning, ``A M^{-1} y = b``.

    The least-squares residual tracks the true residual, so the history
    holds relative true residual norms up to rounding.
    """
    M = M or _identity
    b = np.asarray(b, dtype=np.float64)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    r0 = np.linalg.norm(r)
    hist = [1.0]
    if r0 == 0.0:
        return SolveReport(0, True, hist, operator_complexity, x)
    its = 0
    m = max(1, min(restart, n))
    while its < maxit:
        beta = np.linalg.norm(r)
        V, Z = [r / beta], []
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        j_done = 0
        done = False
        for j in range(m):
            Z.append(M(V[j]))
            w = A @ Z[j]
            for i in range(j + 1):  # modified Gram-Schmidt
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            hnorm = np.linalg.norm(w)
            H[j + 1, j] = hnorm
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            its += 1
            j_done = j + 1
            rel = abs(g[j + 1]) / r0
            hist.append(rel)
            breakdown = hnorm <= 1e-14 * beta
            if rel <= tol or breakdown or its >= maxit:
                done = rel <= tol or breakdown
                break
            V.append(w / hnorm)
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done])
        for i in range(j_done):
            x += y[i] * Z[i]
        r = b - A @ x
        if done:
            return SolveReport(its, True, hist, operator_complexity, x)
        hist[-1] = np.linalg.norm(r) / r0
        if hist[-1] <= tol:
            return SolveReport(its, True, hist, operator_complexity, x)
    return SolveReport(its, False, hist, operator_complexity, x)
