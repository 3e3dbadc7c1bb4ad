"""Randomized 2-block coordinate descent on ``sum_i x_i = 0``.

Each iteration draws a pair ``(i, j)`` and moves block ``i`` by ``+d`` and
block ``j`` by ``-d`` where

    d = -(grad f_i(x_i) - grad f_j(x_j)) / (L_i + L_j).

Applying one array with opposite signs leaves the block sum untouched up to
a single rounding per component.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .problem import BlockProblem, InvalidInputError, gradient_spread, l_norm_sq
from .sampling import PairDistribution, RngState, sample_pair

TRAJECTORY_COLUMNS = ("k", "i", "j", "f", "gap", "r_sq", "residual")


class OracleError(RuntimeError):
    """A block oracle raised or returned non-finite output during a run."""


@dataclass(frozen=True)
class StoppingRule:
    max_iters: int
    gap_tol: float | None = None
    residual_tol: float | None = None

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise InvalidInputError("max_iters must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    """State after ``k`` iterations; ``pair`` produced it (None at k = 0)."""

    k: int
    pair: tuple | None
    f_value: float
    gap: float | None
    r_sq: float | None
    residual: float


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    x: np.ndarray | None = None
    iterations: int = 0
    stop_reason: str = ""

    @property
    def pairs(self):
        return [r.pair for r in self.records if r.pair is not None]

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records])

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for r in self.records:
            i, j = ("", "") if r.pair is None else (r.pair[0] + 1, r.pair[1] + 1)
            writer.writerow([r.k, i, j, fmt(r.f_value), fmt(r.gap), fmt(r.r_sq), fmt(r.residual)])


def fmt(value):
    """17 significant digits; missing values become empty cells."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return f"{value:.17g}"


def _check_pair(problem, i, j):
    if not (0 <= i < problem.N and 0 <= j < problem.N) or i == j:
        raise InvalidInputError(f"invalid block pair ({i}, {j}) for N={problem.N}")


def direction(problem: BlockProblem, x, i, j):
    """Step ``d`` for block ``i``; block ``j`` moves by ``-d``."""
    _check_pair(problem, i, j)
    X = problem.split(x)
    _, gi = problem.blocks[i](X[i])
    _, gj = problem.blocks[j](X[j])
    return -(gi - gj) / (problem.lipschitz[i] + problem.lipschitz[j])


def step(problem: BlockProblem, x, i, j):
    """One feasibility-preserving update on the pair ``(i, j)``."""
    d = direction(problem, x, i, j)
    X = problem.split(x).copy()
    X[i] += d
    X[j] -= d
    return X.reshape(-1)


def default_stride(max_iters):
    return max(1, int(max_iters) // 1000)


def run(problem: BlockProblem, x0, dist: PairDistribution, rng: RngState,
        stop: StoppingRule, record_stride=None, *, f_star=None, x_star=None,
        record_at=None, exact_gap=True) -> Trajectory:
    """Run the method from ``x0`` until ``stop`` fires.

    A record is kept at every multiple of ``record_stride`` (default
    ``max(1, max_iters // 1000)``), at every index in ``record_at``, and at
    the final iterate.  ``gap`` needs ``f_star`` or, for quadratics,
    ``x_star``; ``r_sq`` needs ``x_star``.  Unavailable metrics stay None.
    ``exact_gap=False`` forces ``f - f_star`` even for quadratics.
    """
    if dist.N != problem.N:
        raise InvalidInputError("pair distribution and problem disagree on N")
    stride = default_stride(stop.max_iters) if record_stride is None else int(record_stride)
    if stride < 1:
        raise InvalidInputError("record_stride must be >= 1")
    marks = frozenset(int(k) for k in record_at) if record_at is not None else frozenset()
    exact_gap = exact_gap and x_star is not None and problem.exact_gap
    if stop.gap_tol is not None and f_star is None and not exact_gap:
        raise InvalidInputError("gap_tol requires f_star")

    X = problem.split(x0).copy()
    L = problem.lipschitz
    Lpy = L.tolist()
    blocks = problem.blocks
    try:
        values, G = problem.evaluate(X.reshape(-1))
    except Exception as exc:
        raise OracleError(f"oracle failure at initial point: {exc}") from exc
    Xs = None if x_star is None else problem.split(x_star)

    def gap_now():
        if exact_gap:
            return float(problem.evaluator.excess(X, Xs))
        if f_star is not None:
            return float(np.sum(values)) - f_star
        return None

    def record(k, pair):
        traj.records.append(StepRecord(
            k=k, pair=pair, f_value=float(np.sum(values)), gap=gap_now(),
            r_sq=None if Xs is None else l_norm_sq(X - Xs, L),
            residual=gradient_spread(G)))

    traj = Trajectory()
    record(0, None)
    pair = None
    k = 0
    reason = "max_iters"
    while k < stop.max_iters:
        pair = sample_pair(dist, rng)
        i, j = pair
        d = (G[j] - G[i]) / (Lpy[i] + Lpy[j])
        X[i] += d
        X[j] -= d
        try:
            vi, gi = blocks[i](X[i])
            vj, gj = blocks[j](X[j])
        except Exception as exc:
            raise OracleError(f"oracle failure at iteration {k}, pair {pair}: {exc}") from exc
        if not (np.isfinite(vi) and np.isfinite(vj)):
            raise OracleError(f"non-finite objective at iteration {k}, pair {pair}")
        values[i], values[j] = vi, vj
        G[i], G[j] = gi, gj
        k += 1
        if k % stride == 0 or k in marks:
            record(k, pair)
        if stop.gap_tol is not None and gap_now() <= stop.gap_tol:
            reason = "gap_tol"
            break
        if stop.residual_tol is not None and gradient_spread(G) <= stop.residual_tol:
            reason = "residual_tol"
            break
    if traj.records[-1].k != k:
        record(k, pair)
    traj.x = X.reshape(-1).copy()
    traj.iterations = k
    traj.stop_reason = reason
    return traj


@dataclass
class BatchResult:
    """Per-replica metrics at the checkpoints of a lockstep run.

    Arrays have shape ``(replicas, len(checkpoints))``; ``gap`` and ``r_sq``
    are NaN where unavailable.
    """

    checkpoints: tuple
    f_value: np.ndarray
    gap: np.ndarray
    r_sq: np.ndarray
    x: np.ndarray


def run_batch(problem: BlockProblem, x0, dist: PairDistribution, rngs, iters,
              checkpoints, *, f_star=None, x_star=None, exact_gap=True,
              chunk=1024) -> BatchResult:
    """Advance one trajectory per RNG in lockstep for ``iters`` iterations.

    Replica ``r`` follows exactly the path ``run(problem, x0, dist, rngs[r],
    StoppingRule(iters))`` would, so results match the sequential solver
    bit for bit; the family evaluator only removes per-replica Python
    overhead.  Requires ``problem.evaluator``.
    """
    if problem.evaluator is None:
        raise InvalidInputError("lockstep runs need a vectorised family evaluator")
    checkpoints = tuple(sorted(set(int(k) for k in checkpoints)))
    if checkpoints and not 0 <= checkpoints[0] <= checkpoints[-1] <= iters:
        raise InvalidInputError("checkpoints must lie in [0, iters]")
    M, N, n = len(rngs), problem.N, problem.n
    ev = problem.evaluator
    exact_gap = exact_gap and x_star is not None and problem.exact_gap
    Xs = None if x_star is None else problem.split(x_star)
    L = np.asarray(problem.lipschitz)

    values0, G0 = problem.evaluate(x0)
    X = np.broadcast_to(problem.split(x0), (M, N, n)).copy()
    V = np.broadcast_to(values0, (M, N)).copy()
    G = np.broadcast_to(G0, (M, N, n)).copy()
    cum = np.asarray(dist.cumulative)
    pairs = np.asarray(dist.pairs, dtype=np.intp)
    rows = np.arange(M)

    C = len(checkpoints)
    f_out = np.full((M, C), np.nan)
    gap_out = np.full((M, C), np.nan)
    rsq_out = np.full((M, C), np.nan)
    slot = {k: c for c, k in enumerate(checkpoints)}

    def record(k):
        c = slot[k]
        f_out[:, c] = np.sum(V, axis=1)
        if exact_gap:
            gap_out[:, c] = ev.excess(X, Xs)
        elif f_star is not None:
            gap_out[:, c] = f_out[:, c] - f_star
        if Xs is not None:
            D = X - Xs
            rsq_out[:, c] = np.sum(L * np.sum(D * D, axis=-1), axis=-1)

    if 0 in slot:
        record(0)
    k = 0
    while k < iters:
        span = min(chunk, iters - k)
        U = np.stack([rng.uniforms(span) for rng in rngs])
        choice = np.minimum(np.searchsorted(cum, U, side="right"), len(pairs) - 1)
        for t in range(span):
            I = pairs[choice[:, t], 0]
            J = pairs[choice[:, t], 1]
            d = (G[rows, J] - G[rows, I]) / (L[I] + L[J])[:, None]
            X[rows, I] += d
            X[rows, J] -= d
            vi, gi = ev(I, X[rows, I])
            vj, gj = ev(J, X[rows, J])
            if not (np.all(np.isfinite(vi)) and np.all(np.isfinite(vj))):
                raise OracleError(f"non-finite objective at iteration {k}")
            V[rows, I], V[rows, J] = vi, vj
            G[rows, I], G[rows, J] = gi, gj
            k += 1
            if k in slot:
                record(k)
    return BatchResult(checkpoints, f_out, gap_out, rsq_out, X.reshape(M, -1))
