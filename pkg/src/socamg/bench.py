"""Parameter sweeps over graded tensor meshes and the cost metric."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hierarchy import Smoother, as_preconditioner, build_hierarchy
from .krylov import IndefiniteError, SolveReport, gmres, pcg, random_rhs
from .mesh import assemble, build_mesh, tensor_spec
from .strength import ConfigError, DropConfig

__all__ = [
    "CSV_FIELDS",
    "ExperimentConfig",
    "default_gammas",
    "cost_metric",
    "run_point",
    "run_sweep",
    "write_csv",
    "load_config",
]

log = logging.getLogger(__name__)

CSV_FIELDS = ["family", "gamma1", "gamma2", "soc", "scaling", "classifier", "theta", "lumping",
              "levels", "iters", "complexity", "cost", "status"]


def default_gammas(n: int = 20) -> list:
    return np.geomspace(0.5, 200.0, n).tolist()


@dataclass
class ExperimentConfig:
    """One sweep: problem family, stretch grid, dropping pipeline and solver.

    ``pairing`` is ``"triangular"`` (only gamma2 >= gamma1) or ``"full"``.
    For the cut-drop classifier ``theta`` is used as the gap tolerance.
    """

    family: str = "tensor2d"
    gamma1: list = field(default_factory=default_gammas)
    gamma2: list | None = None
    pairing: str = "triangular"
    soc: str = "DLap"
    scaling: str = "Sgn"
    classifier: str = "Val"
    theta: float = 0.16
    lumping: str = "distributed"
    solver: str = "pcg"
    tol: float | None = None
    maxit: int = 200
    restart: int = 300
    smoother: str = "sgs"
    omega: float = 0.6
    rhs: str = "manufactured"
    seed: int = 20240801
    zcells: int = 80

    def __post_init__(self):
        if self.family not in ("tensor2d", "tensor3d"):
            raise ConfigError(f"unknown problem family {self.family!r}")
        if self.gamma2 is None:
            self.gamma2 = list(self.gamma1)
        self.gamma1 = [float(g) for g in self.gamma1]
        self.gamma2 = [float(g) for g in self.gamma2]
        if min(self.gamma1 + self.gamma2) <= 0:
            raise ConfigError("stretch factors must be positive")
        if self.pairing not in ("triangular", "full"):
            raise ConfigError(f"unknown pairing {self.pairing!r}")
        if self.solver not in ("pcg", "gmres"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.smoother not in ("sgs", "jacobi"):
            raise ConfigError(f"unknown smoother {self.smoother!r}")
        if self.rhs not in ("manufactured", "random"):
            raise ConfigError(f"unknown right-hand side {self.rhs!r}")
        if self.tol is None:
            self.tol = 1e-10 if self.solver == "pcg" else 1e-6
        self.drop  # validates the dropping pipeline

    @property
    def drop(self) -> DropConfig:
        gap = self.theta if str(self.classifier).lower() in ("gap", "cutdrop") else 0.5
        return DropConfig(self.soc, self.scaling, self.classifier, self.theta, gap, self.lumping)

    @property
    def points(self) -> list:
        return [(g1, g2) for g1 in self.gamma1 for g2 in self.gamma2
                if self.pairing == "full" or g2 >= g1]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("sweep config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)


def cost_metric(report: SolveReport) -> float:
    """Iterations times operator complexity; NaN marks an unconverged run."""
    return report.cost if report.converged else math.nan


def run_point(cfg: ExperimentConfig, gamma1: float, gamma2: float) -> dict:
    """Assemble, set up and solve one sweep point; failures become a status string."""
    drop = cfg.drop
    row = dict(family=cfg.family, gamma1=f"{gamma1:.6g}", gamma2=f"{gamma2:.6g}", soc=drop.soc,
               scaling=drop.scaling, classifier=drop.classifier, theta=f"{cfg.theta:g}",
               lumping=drop.lumping, levels="", iters="", complexity="", cost="", status="")
    dim = 2 if cfg.family == "tensor2d" else 3
    system = assemble(build_mesh(tensor_spec(dim, gamma1, gamma2, zcells=cfg.zcells)))
    row["flagged"] = ""
    try:
        H = build_hierarchy(system.A, system.coords, drop,
                            smoother=Smoother(cfg.smoother, cfg.omega))
    except (ArithmeticError, ValueError, MemoryError) as exc:
        row["status"] = f"setup failed: {type(exc).__name__}"
        return row
    row["levels"] = H.n_levels
    # rows whose filtered diagonal ended up <= 0, over all levels
    row["flagged"] = sum(L.flagged_rows for L in H.levels)
    row["complexity"] = f"{H.operator_complexity:.6f}"
    b = system.f if cfg.rhs == "manufactured" else random_rhs(len(system.f), cfg.seed)
    M = as_preconditioner(H)
    try:
        if cfg.solver == "pcg":
            rep = pcg(system.A, b, M, cfg.tol, cfg.maxit, system.u0, H.operator_complexity)
        else:
            rep = gmres(system.A, b, M, cfg.restart, cfg.tol, cfg.maxit, system.u0,
                        H.operator_complexity)
    except IndefiniteError:
        row["status"] = "solve failed: indefinite"
        return row
    row["iters"] = rep.iterations
    if rep.converged:
        row["cost"] = f"{rep.cost:.6f}"
        row["status"] = "converged"
    else:
        row["status"] = "maxit"
    return row


def run_sweep(cfg: ExperimentConfig, progress=None) -> list:
    """Run every stretch pair in deterministic (gamma1, gamma2) order."""
    rows = []
    for g1, g2 in cfg.points:
        row = run_point(cfg, g1, g2)
        log.info("%s %s %s -> %s", cfg.drop.name, row["gamma1"], row["gamma2"], row["status"])
        if progress:
            progress(row)
        rows.append(row)
    return rows


def write_csv(path_or_file, rows: list) -> None:
    def _write(fh):
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
