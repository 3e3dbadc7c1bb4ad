"""Seeded Monte Carlo replica sets and certification of the rate bounds.

Replica ``r`` draws its pairs from ``RngState(base_seed ^ splitmix64(r))``.
Replicas are split into contiguous chunks (one per worker) and results are
folded in replica order, so the output is identical for any worker count.
Statistics use ``math.fsum`` so they do not depend on replica order either.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CHECKPOINTS, ConfigError, ExperimentConfig
from .problem import (BlockProblem, R_sq_upper_quadratic, build_problem, kkt_solve_quadratic,
                      tilde_R_sq as _tilde_R_sq)
from .sampling import RngState, build_distribution
from .solver import StoppingRule, fmt, run, run_batch
from .theory import (bound_values, complexity_report, linear_factor, nng_linear_factor)

SUMMARY_COLUMNS = ("k", "mean_gap", "stderr_gap", "mean_lyapunov", "bound_ours_sublinear",
                   "bound_ours_linear", "bound_nng_sublinear", "bound_nng_linear")
REPLICA_COLUMNS = ("replica", "k", "gap", "r_sq")
Z = 3.0


@dataclass
class Inputs:
    """Resolved analytic / overridden quantities for one experiment."""

    problem: BlockProblem
    x0: np.ndarray
    x_star: np.ndarray | None
    f_star: float | None
    gap0: float | None
    tilde_R_sq: float | None
    R_sq: float | None
    mu_f: float | None
    eps: float | None
    rho: float | None
    iters: int
    checkpoints: tuple
    resolution: float


def gap_resolution(problem, x_star=None, f_star=None):
    """Smallest gap double precision can resolve for this instance.

    With a known optimum, iterates settle within a few ulps of ``x*`` per
    component, i.e. ``||x - x*||_L^2 ~ sum_i L_i n (N ulp(x*))^2``; otherwise
    the floor is the rounding error of evaluating ``f`` as a sum of N terms.
    """
    eps = np.finfo(float).eps
    if x_star is not None:
        scale = max(1.0, float(np.max(np.abs(x_star))))
        delta = problem.N * eps * scale
        return 0.5 * float(np.sum(problem.lipschitz)) * problem.n * delta ** 2
    return 4.0 * problem.N * eps * max(1.0, abs(f_star or 0.0))


def resolve(config: ExperimentConfig) -> Inputs:
    """Build the problem and fill in f*, radii and mu_f (overrides first)."""
    spec = config.problem
    problem = build_problem(spec)
    x0 = np.asarray(config.x0, dtype=float)
    x_star = f_star = None
    R_sq = t_R_sq = None
    mu_f = problem.mu_f
    if spec.kind == "quadratic":
        x_star, f_star, _ = kkt_solve_quadratic(spec)
        t_R_sq = _tilde_R_sq(x0, x_star, problem.lipschitz)
        R_sq = R_sq_upper_quadratic(spec, x0)
    if config.f_star is not None:
        f_star = config.f_star
    if config.tilde_R_sq is not None:
        t_R_sq = config.tilde_R_sq
    if config.R_sq is not None:
        R_sq = config.R_sq
    if config.mu_f is not None:
        mu_f = config.mu_f
    if mu_f is not None and mu_f <= 0:
        mu_f = None

    gap0 = None
    if x_star is not None and config.f_star is None:
        gap0 = problem.gap(x0, x_star=x_star)
    elif f_star is not None:
        gap0 = problem.value(x0) - f_star

    eps = config.eps
    if config.eps_rel is not None:
        if gap0 is None:
            raise ConfigError("eps_rel needs a known optimal value")
        eps = config.eps_rel * gap0

    iters = config.iters
    if iters is None:
        if R_sq is None or t_R_sq is None or gap0 is None:
            raise ConfigError("iters = auto needs R_sq, tilde_R_sq and f_star")
        K = complexity_report(spec.N, R_sq, t_R_sq, eps, config.rho, gap0).K
        iters = max(1, math.ceil(K))
    checkpoints = config.checkpoints
    if checkpoints is None:
        checkpoints = tuple(k for k in DEFAULT_CHECKPOINTS if k < iters) + (iters,)
    checkpoints = tuple(sorted(set(int(k) for k in checkpoints)))
    if checkpoints[0] < 0 or checkpoints[-1] > iters:
        raise ConfigError(f"checkpoints must lie in [0, {iters}]")
    exact = x_star is not None and config.f_star is None and problem.exact_gap
    resolution = gap_resolution(problem, x_star if exact else None, f_star)
    return Inputs(problem, x0, x_star, f_star, gap0, t_R_sq, R_sq, mu_f, eps, config.rho,
                  iters, checkpoints, resolution)


def _run_chunk(args):
    """Per-replica (gap, r_sq) at the checkpoints for replicas ``lo..hi-1``."""
    inputs, base_seed, lo, hi, marks, exact_gap = args
    problem = inputs.problem
    dist = build_distribution(problem.lipschitz)
    rngs = [RngState.for_replica(base_seed, r) for r in range(lo, hi)]
    kw = dict(f_star=inputs.f_star, x_star=inputs.x_star, exact_gap=exact_gap)
    if problem.evaluator is not None:
        out = run_batch(problem, inputs.x0, dist, rngs, inputs.iters, marks, **kw)
        return out.gap, out.r_sq
    gaps = np.full((hi - lo, len(marks)), np.nan)
    rsq = np.full_like(gaps, np.nan)
    stop = StoppingRule(inputs.iters)
    for row, rng in enumerate(rngs):
        traj = run(problem, inputs.x0, dist, rng, stop, record_stride=inputs.iters + 1,
                   record_at=marks, **kw)
        by_k = {rec.k: rec for rec in traj.records}
        for c, k in enumerate(marks):
            rec = by_k[k]
            gaps[row, c] = np.nan if rec.gap is None else rec.gap
            rsq[row, c] = np.nan if rec.r_sq is None else rec.r_sq
    return gaps, rsq


def _mean_stderr(column):
    values = [float(v) for v in column]
    M = len(values)
    mean = math.fsum(values) / M
    if M < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (M - 1)
    return mean, math.sqrt(var / M)


@dataclass
class ExperimentSummary:
    checkpoints: tuple
    mean_gap: np.ndarray
    stderr_gap: np.ndarray
    mean_lyapunov: np.ndarray
    stderr_lyapunov_step: np.ndarray
    bounds: np.ndarray  # (C, 4): ours_sub, ours_lin, nng_sub, nng_lin
    success_fraction: float | None
    replicas: int
    iters: int
    seed: int
    N: int
    mu_f: float | None
    tilde_R_sq: float | None
    R_sq: float | None
    gap0: float | None
    f_star: float | None
    eps: float | None
    rho: float | None
    resolution: float = 0.0
    gaps: np.ndarray = field(repr=False, default=None)
    r_sq: np.ndarray = field(repr=False, default=None)

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for c, k in enumerate(self.checkpoints):
            writer.writerow([k, fmt(self.mean_gap[c]), fmt(self.stderr_gap[c]),
                             fmt(self.mean_lyapunov[c])] + [fmt(v) for v in self.bounds[c]])

    def write_replica_csv(self, fh):
        """Raw per-replica gap and r_sq at every checkpoint."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPLICA_COLUMNS)
        for r in range(self.gaps.shape[0]):
            for c, k in enumerate(self.checkpoints):
                writer.writerow([r, k, fmt(self.gaps[r, c]), fmt(self.r_sq[r, c])])

    def lines(self):
        out = [f"replicas={self.replicas}", f"iters={self.iters}", f"seed={self.seed}",
               f"N={self.N}"]
        for name in ("mu_f", "tilde_R_sq", "R_sq", "gap0", "f_star", "eps", "rho",
                     "resolution", "success_fraction"):
            out.append(f"{name}={fmt(getattr(self, name))}")
        return out


def summarize(checkpoints, gaps, r_sq, *, N, tilde_R_sq, R_sq=None, mu_f=None, gap0=None,
              eps=None, rho=None, final_gaps=None, **echo) -> ExperimentSummary:
    """Checkpoint statistics from per-replica arrays of shape (M, C)."""
    gaps = np.asarray(gaps, dtype=float)
    r_sq = np.asarray(r_sq, dtype=float)
    M, C = gaps.shape
    lyap = 0.5 * r_sq + gaps
    mean_gap = np.empty(C)
    se_gap = np.empty(C)
    mean_lyap = np.full(C, np.nan)
    se_step = np.full(C, np.nan)
    for c in range(C):
        mean_gap[c], se_gap[c] = _mean_stderr(gaps[:, c])
        if not np.any(np.isnan(lyap[:, c])):
            mean_lyap[c] = _mean_stderr(lyap[:, c])[0]
            if c > 0 and not np.any(np.isnan(lyap[:, c - 1])):
                se_step[c] = _mean_stderr(lyap[:, c] - lyap[:, c - 1])[1]
    if tilde_R_sq is None:
        bounds = np.full((C, 4), np.nan)
    else:
        bounds = np.array([bound_values(int(k), N, tilde_R_sq, R_sq, mu_f, gap0)
                           for k in checkpoints]).reshape(C, 4)
    success = None
    if eps is not None:
        final = gaps[:, -1] if final_gaps is None else np.asarray(final_gaps)
        success = float(np.count_nonzero(final <= eps)) / M
    return ExperimentSummary(tuple(int(k) for k in checkpoints), mean_gap, se_gap, mean_lyap,
                             se_step, bounds, success, replicas=M, N=N, mu_f=mu_f,
                             tilde_R_sq=tilde_R_sq, R_sq=R_sq, gap0=gap0, eps=eps, rho=rho,
                             gaps=gaps, r_sq=r_sq, **echo)


def run_replicas(config: ExperimentConfig, require_f_star=True) -> ExperimentSummary:
    """Run ``config.replicas`` independent trajectories and summarise them."""
    inputs = resolve(config)
    if inputs.f_star is None and inputs.x_star is None and require_f_star:
        raise ConfigError("bound certification needs f* (set [bounds] f_star for this family)")
    marks = tuple(sorted(set(inputs.checkpoints) | {inputs.iters}))
    # an f* override means gaps are measured against that value
    exact_gap = config.f_star is None

    M = config.replicas
    workers = min(config.workers, M)
    edges = np.linspace(0, M, workers + 1).astype(int)
    jobs = [(inputs, config.seed, int(lo), int(hi), marks, exact_gap)
            for lo, hi in zip(edges[:-1], edges[1:])]
    if workers == 1:
        parts = [_run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    gaps = np.vstack([p[0] for p in parts])
    r_sq = np.vstack([p[1] for p in parts])
    cols = [marks.index(k) for k in inputs.checkpoints]
    return summarize(inputs.checkpoints, gaps[:, cols], r_sq[:, cols], N=inputs.problem.N,
                     tilde_R_sq=inputs.tilde_R_sq, R_sq=inputs.R_sq, mu_f=inputs.mu_f,
                     gap0=inputs.gap0, eps=inputs.eps, rho=inputs.rho,
                     final_gaps=gaps[:, -1], iters=inputs.iters, seed=config.seed,
                     f_star=inputs.f_star, resolution=inputs.resolution)


def summary_from_replica_csv(fh, **kwargs) -> ExperimentSummary:
    """Rebuild a summary from a file written by ``write_replica_csv``."""
    rows = list(csv.DictReader(fh))
    checkpoints = sorted({int(r["k"]) for r in rows})
    M = max(int(r["replica"]) for r in rows) + 1
    slot = {k: c for c, k in enumerate(checkpoints)}
    gaps = np.full((M, len(checkpoints)), np.nan)
    r_sq = np.full_like(gaps, np.nan)
    for r in rows:
        i, c = int(r["replica"]), slot[int(r["k"])]
        gaps[i, c] = float(r["gap"]) if r["gap"] else np.nan
        r_sq[i, c] = float(r["r_sq"]) if r["r_sq"] else np.nan
    return summarize(checkpoints, gaps, r_sq, **kwargs)


@dataclass
class CertifyReport:
    passed: bool
    lines: list
    failures: list


def certify(summary: ExperimentSummary, z=Z) -> CertifyReport:
    """Check the Monte Carlo estimates against the theoretical envelopes.

    (a) mean gap <= our bound + z stderr at every checkpoint (sublinear, and
        linear when mu_f is known); (b) our sublinear bound <= the earlier one
        for k >= 1, and our linear factor <= the earlier factor; (c) success
        fraction >= (1 - rho) - z sqrt(rho (1 - rho) / M); (d) the mean of
        ``r_sq/2 + gap`` does not increase between checkpoints beyond z
        paired standard errors.

    Where a bound drops below ``summary.resolution`` (the gap double
    precision can represent), (a) and (d) accept estimates at or below that
    floor and label the line ``floor``.
    """
    lines, failures = [], []
    floor = summary.resolution

    def check(tag, ok, msg, at_floor=False):
        status = "PASS" if ok else "FAIL"
        line = f"{status} {tag} {msg}" + (" [floor]" if ok and at_floor else "")
        lines.append(line)
        if not ok:
            failures.append(line)

    b = summary.bounds
    for c, k in enumerate(summary.checkpoints):
        m, se = summary.mean_gap[c], summary.stderr_gap[c]
        for col, name in ((0, "sublinear"), (1, "linear")):
            if not np.isnan(b[c, col]):
                strict = m <= b[c, col] + z * se
                check(f"(a) {name}", strict or m <= floor,
                      f"k={k} mean_gap={m:.6g} bound={b[c, col]:.6g} stderr={se:.3g}",
                      at_floor=not strict)
        if k >= 1 and not np.isnan(b[c, 2]):
            check("(b) sublinear", b[c, 0] <= b[c, 2],
                  f"k={k} ours={b[c, 0]:.6g} nng={b[c, 2]:.6g}")
    if summary.mu_f is not None:
        ours, nng = linear_factor(summary.N, summary.mu_f), nng_linear_factor(summary.N, summary.mu_f)
        check("(b) linear factor", ours <= nng, f"ours={ours:.6g} nng={nng:.6g}")
    if summary.success_fraction is not None and summary.rho is not None:
        rho, M = summary.rho, summary.replicas
        need = (1 - rho) - z * math.sqrt(rho * (1 - rho) / M)
        check("(c) success", summary.success_fraction >= need,
              f"fraction={summary.success_fraction:.6g} floor={need:.6g} eps={summary.eps:.6g}")
    lyap, se_step = summary.mean_lyapunov, summary.stderr_lyapunov_step
    for c in range(1, len(summary.checkpoints)):
        if np.isnan(lyap[c]) or np.isnan(lyap[c - 1]):
            continue
        k0, k1 = summary.checkpoints[c - 1], summary.checkpoints[c]
        strict = lyap[c] <= lyap[c - 1] + z * se_step[c]
        check("(d) lyapunov", strict or lyap[c] <= 2 * floor,
              f"k={k0}->{k1} {lyap[c - 1]:.6g}->{lyap[c]:.6g} stderr={se_step[c]:.3g}",
              at_floor=not strict)
    return CertifyReport(not failures, lines, failures)
