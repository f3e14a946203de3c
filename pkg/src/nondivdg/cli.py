"""Command-line front end: ``run``, ``mesh`` and ``check-cordes``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .coefficients import DOMAINS, PROBLEMS, check_cordes, get_domain, get_problem
from .errors import (ConfigurationError, CordesError, GeometryError, InvalidCoefficientError,
                     ResolutionError, SolverError)
from .mesh import mesh_sequence, validate, write_mesh

NUMERICAL_ERRORS = (GeometryError, ResolutionError, SolverError, InvalidCoefficientError,
                    CordesError, np.linalg.LinAlgError, FloatingPointError)


def _bool(s):
    return ex._parse_bool(s)


def build_parser():
    ap = argparse.ArgumentParser(prog="nondivdg",
                                 description="DG solver for A:D^2u = f on curved domains")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a built-in experiment")
    run.add_argument("--config", help="key=value file; command-line flags win")
    run.add_argument("--experiment", choices=ex.EXPERIMENTS)
    run.add_argument("--degree", type=int)
    run.add_argument("--refinements", type=int)
    run.add_argument("--h0", type=float, help="target size of the coarsest mesh")
    run.add_argument("--problem", choices=sorted(PROBLEMS), help="problem of a custom run")
    run.add_argument("--sigma", type=float)
    run.add_argument("--c-stab", dest="c_stab", type=float)
    run.add_argument("--c-H", dest="c_H", type=float)
    run.add_argument("--c-star", dest="c_star", type=float)
    run.add_argument("--theta", type=float)
    run.add_argument("--curvature-terms", dest="curvature_terms", type=_bool)
    run.add_argument("--calibrate", type=_bool)
    run.add_argument("--quad-order", dest="quad_order", type=int)
    run.add_argument("--consistency-mode", dest="consistency_mode",
                     choices=("exact", "interpolant"))
    run.add_argument("--output-dir", dest="output_dir")
    run.add_argument("--export-mesh", dest="export_mesh", action="store_const", const=True)
    run.add_argument("--dump-penalties", dest="dump_penalties", action="store_const",
                     const=True)

    mesh = sub.add_parser("mesh", help="generate a snapped mesh")
    mesh.add_argument("--domain", required=True, choices=sorted(DOMAINS))
    mesh.add_argument("--h", type=float, required=True)
    mesh.add_argument("--out", help="dgmesh output path")
    mesh.add_argument("--check", action="store_true", help="print the mesh report")

    cc = sub.add_parser("check-cordes", help="Cordes report of a built-in problem")
    cc.add_argument("problem", choices=sorted(PROBLEMS))
    cc.add_argument("--h", type=float, default=0.1, help="sampling mesh size")
    return ap


def cmd_run(args):
    keys = [a for a in vars(args) if a not in ("command", "config")]
    cfg = ex.load_config(args.config, **{k: getattr(args, k) for k in keys})
    return ex.run_experiment(cfg).status


def cmd_mesh(args):
    if not args.h > 0:
        raise ConfigurationError(f"--h must be positive, got {args.h}")
    domain = get_domain(args.domain)
    mesh = mesh_sequence(domain, args.h, 1)[0]
    if args.out:
        write_mesh(mesh, args.out)
        print(f"wrote {args.out}")
    if args.check:
        print(validate(mesh, domain).format())
        portions = sorted(set(int(p) for p in mesh.boundary_faces[:, 2]))
        print(f"boundary portions: {' '.join(map(str, portions))}")
    return ex.STATUS_OK


def cmd_check_cordes(args):
    domain, coeffs = get_problem(args.problem)
    samples = ex.domain_samples(mesh_sequence(domain, args.h, 1)[0])
    try:
        rep = check_cordes(coeffs, samples)
    except CordesError as exc:
        rep = exc.report
        print(f"{args.problem}: Cordes condition violated")
        status = ex.STATUS_THRESHOLD
    else:
        status = ex.STATUS_OK
    print(f"epsilon: {rep.epsilon:.17g}")
    print(f"worst_ratio: {rep.worst_ratio:.17g}")
    print(f"worst_point: {rep.worst_point[0]:.17g} {rep.worst_point[1]:.17g}")
    return status


COMMANDS = {"run": cmd_run, "mesh": cmd_mesh, "check-cordes": cmd_check_cordes}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return ex.STATUS_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ex.STATUS_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
