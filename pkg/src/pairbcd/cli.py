"""Command line entry point: ``pairbcd {solve,dist,verify,bounds,mc}``.

Exit codes: 0 success / certification passed, 2 certification or
verification failure, 1 usage or configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import sys

from .config import ConfigError, load_config
from .experiment import certify, resolve, run_replicas
from .problem import InvalidInputError, UnsupportedProblemError, build_problem
from .sampling import RngState, build_distribution
from .solver import StoppingRule, fmt, run
from .theory import bound_set, complexity_report
from . import verify as verify_mod


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load(args):
    if not args.config:
        raise UsageError("--config FILE is required for this subcommand")
    return load_config(args.config)


def cmd_dist(args):
    cfg = _load(args)
    dist = build_distribution(build_problem(cfg.problem).lipschitz)
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("i", "j", "p_ij"))
        for i, j, p in dist.rows():
            writer.writerow((i, j, fmt(p)))
    return 0


def cmd_solve(args):
    cfg = _load(args)
    exp = cfg.experiment_config(replicas=1, iters=cfg.solver.max_iters, checkpoints=(0,))
    exp.eps = exp.eps_rel = exp.rho = None
    inputs = resolve(exp)
    problem = inputs.problem
    seed = cfg.solver.seed if args.seed is None else args.seed
    stop = StoppingRule(cfg.solver.max_iters, cfg.solver.gap_tol, cfg.solver.residual_tol)
    traj = run(problem, inputs.x0, build_distribution(problem.lipschitz), RngState(seed), stop,
               cfg.solver.record_stride, f_star=inputs.f_star, x_star=inputs.x_star,
               exact_gap=exp.f_star is None)
    with _output(args.out) as fh:
        traj.write_csv(fh)
    last = traj.records[-1]
    print(f"iterations={traj.iterations} stop={traj.stop_reason} f={fmt(last.f_value)} "
          f"gap={fmt(last.gap)} residual={fmt(last.residual)}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def cmd_bounds(args):
    cfg = _load(args)
    exp = cfg.experiment_config(checkpoints=(0,), iters=1)
    eps = args.eps if args.eps is not None else exp.eps
    rho = args.rho if args.rho is not None else exp.rho
    exp.eps, exp.rho, exp.eps_rel = None, None, None
    inputs = resolve(exp)
    if inputs.tilde_R_sq is None:
        raise ConfigError("bounds need tilde_R_sq ([bounds] tilde_R_sq for this family)")
    if eps is None and cfg.experiment.get("eps_rel") is not None and inputs.gap0 is not None:
        eps = cfg.experiment["eps_rel"] * inputs.gap0
    k_max = args.k_max if args.k_max is not None else cfg.bounds.get("k_max", 100)
    bs = bound_set(k_max, cfg.problem.N, inputs.tilde_R_sq, inputs.R_sq, inputs.mu_f,
                   inputs.gap0)
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(bs.COLUMNS)
        for row in bs.rows():
            writer.writerow([int(row[0])] + [fmt(float(v)) for v in row[1:]])
    if eps is not None and rho is not None:
        if inputs.R_sq is None or inputs.gap0 is None:
            raise ConfigError("complexity report needs R_sq and f_star")
        report = complexity_report(cfg.problem.N, inputs.R_sq, inputs.tilde_R_sq, eps, rho,
                                   inputs.gap0, inputs.mu_f)
        if args.out in (None, "-"):
            print()
        print("\n".join(report.lines()))
    return 0


def cmd_mc(args):
    cfg = _load(args)
    overrides = dict(replicas=args.replicas, seed=args.seed, rho=args.rho,
                     workers=args.workers)
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.checkpoints is not None:
        overrides["checkpoints"] = tuple(int(v) for v in args.checkpoints.split(","))
    if args.eps is not None:
        overrides["eps"] = args.eps
        cfg.experiment.pop("eps_rel", None)
    exp = cfg.experiment_config(**overrides)
    summary = run_replicas(exp)
    with _output(args.out) as fh:
        summary.write_csv(fh)
    if args.replica_out:
        with _output(args.replica_out) as fh:
            summary.write_replica_csv(fh)
    report = certify(summary)
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print("\n".join(summary.lines() + report.lines), file=stream)
    print(f"certify={'pass' if report.passed else 'fail'}", file=stream)
    return 0 if report.passed else 2


def cmd_verify(args):
    base = 0 if args.seed is None else args.seed
    if args.instance is not None:
        if not args.only:
            raise UsageError("--instance needs --only CHECK")
        found = verify_mod.run_check(args.only, args.instance)
    else:
        found = verify_mod.run_suite(base, args.instances, only=args.only)
    if found:
        print(f"VIOLATION {found[0]}")
        return 2
    print(f"verify: all checks passed (seed={base}, instances={args.instances})")
    return 0


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--out", metavar="PATH")

    parser = _Parser(prog="pairbcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="run one trajectory, write CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("dist", parents=[common], help="print the pair distribution")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("verify", parents=[common], help="randomised property suite")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--only", choices=sorted(verify_mod.CHECKS))
    p.add_argument("--instance", type=int, metavar="SEED", help="replay one instance seed")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", parents=[common], help="bound envelopes and complexities")
    p.add_argument("--k-max", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo replicas + certification")
    p.add_argument("--replicas", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--checkpoints", metavar="K1,K2,...")
    p.add_argument("--workers", type=int)
    p.add_argument("--replica-out", metavar="PATH", help="per-replica raw CSV")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, InvalidInputError, UnsupportedProblemError) as exc:
        print(f"pairbcd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
