"""Command-line entry point: ``socamg <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench
from .aggregation import aggregate, write_aggregates
from .geometric import geo_solve
from .hierarchy import Smoother, as_preconditioner, build_hierarchy
from .krylov import gmres, pcg, random_rhs
from .mesh import FACES, assemble, build_mesh, interior_stencil, stretched_spec, tensor_spec, \
    uniform_spec, write_coordinates
from .sparse import read_matrix_market, write_matrix_market
from .strength import ConfigError, DropConfig, build_strength, scaled_entries, soc_matrix


def _faces(text: str, dim: int):
    if text == "all":
        return FACES[: 2 * dim]
    if text == "none":
        return ()
    faces = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in faces if f not in FACES[: 2 * dim]]
    if bad:
        raise ConfigError(f"unknown faces {bad}")
    return faces


def _mesh_args(p):
    p.add_argument("--dim", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--alpha", type=float, default=1.0, help="stretch of the last axis")
    p.add_argument("--gamma1", type=float, help="x grading factor (graded tensor mesh)")
    p.add_argument("--gamma2", type=float, help="y grading factor (graded tensor mesh)")
    p.add_argument("--cells", type=int, default=16, help="cells per axis for uniform meshes")
    p.add_argument("--bc", default="all",
                   help="Dirichlet faces: 'all', 'none' or a list such as 'ylo,yhi'")


def _drop_args(p):
    p.add_argument("--soc", default="DLap")
    p.add_argument("--scaling", default="Sgn")
    p.add_argument("--classifier", default="Val")
    p.add_argument("--theta", type=float, default=0.16)
    p.add_argument("--theta-gap", type=float, default=None,
                   help="cut-drop gap tolerance (defaults to --theta)")
    p.add_argument("--lumping", default="distributed")


def _drop(args) -> DropConfig:
    gap = args.theta_gap
    if gap is None:
        gap = args.theta if str(args.classifier).lower() in ("gap", "cutdrop") else 0.5
    return DropConfig(args.soc, args.scaling, args.classifier, args.theta, gap, args.lumping)


def _system(args):
    if args.gamma1 is not None or args.gamma2 is not None:
        if args.dim not in (2, 3):
            raise ConfigError("graded tensor meshes are 2D or 3D")
        spec = tensor_spec(args.dim, args.gamma1 or 1.0, args.gamma2 or 1.0)
    elif args.alpha != 1.0:
        spec = stretched_spec(args.dim, args.cells, args.alpha, dirichlet=_faces(args.bc, args.dim))
    else:
        spec = uniform_spec(args.dim, args.cells, dirichlet=_faces(args.bc, args.dim))
    mesh = build_mesh(spec)
    return mesh, assemble(mesh)


def cmd_assemble(args):
    _, system = _system(args)
    write_matrix_market(f"{args.out}.mtx", system.A)
    write_coordinates(f"{args.out}.coords", system.coords)
    np.savetxt(f"{args.out}.rhs", system.f, fmt="%.17g")
    print(f"{system.A.shape[0]} dofs, {system.A.nnz} nonzeros -> {args.out}.mtx/.coords/.rhs")


def _load(args):
    if args.matrix:
        A = read_matrix_market(args.matrix)
        coords = np.loadtxt(args.coords, ndmin=2) if args.coords else None
        if coords is not None and coords.shape[1] < 3:
            coords = np.pad(coords, ((0, 0), (0, 3 - coords.shape[1])))
        b = np.loadtxt(args.rhs) if getattr(args, "rhs", None) else random_rhs(A.shape[0])
        return A, coords, b, np.zeros(A.shape[0])
    _, system = _system(args)
    return system.A, system.coords, system.f, system.u0


def cmd_strength(args):
    A, coords, _, _ = _load(args)
    cfg = _drop(args)
    G = build_strength(A, coords, cfg)
    rows_empty = int(np.sum(np.diff(G.G.indptr) == 0))
    print(f"{cfg.name}: {G.nnz} strong edges, {rows_empty} rows without strong neighbours")
    if args.out:
        G.write_edges(args.out)
    if args.aggregates:
        agg = aggregate(G)
        write_aggregates(args.aggregates, agg)
        print(f"{agg.n_aggregates} aggregates")


def cmd_solve(args):
    A, coords, b, x0 = _load(args)
    cfg = _drop(args)
    H = build_hierarchy(A, coords, cfg, smoother=Smoother(args.smoother, args.omega))
    print(H.summary_text())
    if args.summary_csv:
        with open(args.summary_csv, "w") as fh:
            fh.write(H.summary_csv())
    M = as_preconditioner(H)
    if args.solver == "pcg":
        rep = pcg(A, b, M, args.tol or 1e-10, args.maxit, x0, H.operator_complexity)
    else:
        rep = gmres(A, b, M, args.restart, args.tol or 1e-6, args.maxit, x0, H.operator_complexity)
    status = "converged" if rep.converged else "not converged"
    print(f"{args.solver}: {rep.iterations} iterations, {status}, cost {rep.cost:.3f}")


def cmd_sweep(args):
    overrides = dict(family=args.family, soc=args.soc, scaling=args.scaling,
                     classifier=args.classifier, theta=args.theta, lumping=args.lumping,
                     solver=args.solver, pairing=args.pairing, maxit=args.maxit)
    if args.gammas:
        g = [float(t) for t in args.gammas.split(",")]
        overrides.update(gamma1=g, gamma2=g)
    if args.config:
        cfg = bench.load_config(args.config, **overrides)
    else:
        cfg = bench.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    rows = bench.run_sweep(cfg)
    if args.out:
        bench.write_csv(args.out, rows)
    else:
        bench.write_csv(sys.stdout, rows)


def cmd_geo(args):
    abar = float("inf") if args.abar in ("inf", "infinity") else float(args.abar)
    rep = geo_solve(args.alpha, abar, args.levels, args.n)
    status = "converged" if rep.converged else "not converged"
    print(f"semi_{args.abar} alpha={args.alpha:g}: {rep.iterations} iterations, {status}, "
          f"complexity {rep.operator_complexity:.3f}")


def cmd_stencil(args):
    mesh = build_mesh(stretched_spec(args.dim, 4, args.alpha, dirichlet=()))
    system = assemble(mesh)
    center = mesh.vertex(*([2] * args.dim))
    st = interior_stencil(system.A, mesh, center)
    V = scaled_entries(soc_matrix(system.A, system.coords, args.soc), args.scaling)
    print("offset value scaled")
    for off, val in sorted(st.items()):
        col = mesh.vertex(*(2 + np.array(off)))
        scaled = "" if col == center else f"{V[center, col]:.6g}"
        print(" ".join(f"{o:+d}" for o in off), f"{val:.12g}", scaled)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="socamg", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble a Poisson system and export it")
    _mesh_args(p)
    p.add_argument("--out", default="system")
    p.set_defaults(func=cmd_assemble)

    for name, func, hlp in (("strength", cmd_strength, "build a strength graph"),
                            ("solve", cmd_solve, "build an AMG hierarchy and solve")):
        p = sub.add_parser(name, help=hlp)
        _mesh_args(p)
        _drop_args(p)
        p.add_argument("--matrix", help="Matrix Market input instead of a generated mesh")
        p.add_argument("--coords", help="coordinates file matching --matrix")
        p.set_defaults(func=func)
        if name == "strength":
            p.add_argument("--out", help="edge list output")
            p.add_argument("--aggregates", help="aggregate id output")
        else:
            p.add_argument("--rhs", help="right-hand side file matching --matrix")
            p.add_argument("--solver", choices=("pcg", "gmres"), default="pcg")
            p.add_argument("--tol", type=float)
            p.add_argument("--maxit", type=int, default=200)
            p.add_argument("--restart", type=int, default=300)
            p.add_argument("--smoother", choices=("sgs", "jacobi"), default="sgs")
            p.add_argument("--omega", type=float, default=0.6)
            p.add_argument("--summary-csv", help="write the hierarchy summary as CSV")

    p = sub.add_parser("sweep", help="run a stretch sweep and write CSV")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="CSV output (stdout if omitted)")
    p.add_argument("--family", choices=("tensor2d", "tensor3d"))
    p.add_argument("--soc")
    p.add_argument("--scaling")
    p.add_argument("--classifier")
    p.add_argument("--theta", type=float)
    p.add_argument("--lumping")
    p.add_argument("--solver", choices=("pcg", "gmres"))
    p.add_argument("--pairing", choices=("triangular", "full"))
    p.add_argument("--maxit", type=int)
    p.add_argument("--gammas", help="comma-separated stretch factors for both axes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("geo", help="geometric semi-coarsening solve")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--abar", default="1")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--n", type=int, default=82, help="points per axis")
    p.set_defaults(func=cmd_geo)

    p = sub.add_parser("stencil", help="print an interior stencil and its scaled values")
    p.add_argument("--dim", type=int, default=3, choices=(2, 3))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--soc", default="A")
    p.add_argument("--scaling", default="SA")
    p.set_defaults(func=cmd_stencil)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
