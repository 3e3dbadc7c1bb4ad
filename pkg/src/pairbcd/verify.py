"""Randomised property suite behind the ``verify`` subcommand.

Every check draws its instances from ``numpy.random.default_rng(seed)`` with
``seed = splitmix64(base_seed ^ index)``, so a reported violation can be
replayed alone with ``verify --only CHECK --instance SEED``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .problem import (FAMILIES, ProblemFamilySpec, build_problem, check_block_assumptions,
                      check_gradients_fd, feasibility_violation, grad_residual,
                      kkt_solve_quadratic, project_to_S)
from .sampling import build_distribution, splitmix64, MASK64
from .theory import (basis_vectors, bound_nng_sublinear, bound_sublinear, decompose,
                     descent_check, lemma2_error, lemma3_check, linear_factor,
                     nng_linear_factor, reconstruct)


@dataclass
class Violation:
    check: str
    seed: int
    message: str

    def __str__(self):
        return f"{self.check}: {self.message} (replay: verify --only {self.check} --instance {self.seed})"


def random_family(kind, rng, N=None, n=None, multiplier=1.0):
    """A random instance of one of the built-in families."""
    N = int(rng.integers(2, 9)) if N is None else N
    n = int(rng.integers(1, 5)) if n is None else n
    kw = {}
    if kind == "quadratic":
        kw = dict(a=10.0 ** rng.uniform(-1, 1, N), b=rng.standard_normal((N, n)))
    elif kind == "pseudo_huber":
        kw = dict(w=10.0 ** rng.uniform(-1, 1, N))
    else:
        kw = dict(c=rng.standard_normal((N, n)) + 0.1)
    return ProblemFamilySpec(kind, N, n, lipschitz_multiplier=multiplier, **kw)


def random_point_in_S(rng, N, n, scale=1.0):
    return project_to_S(scale * rng.standard_normal(N * n), N)


def check_assumptions(rng):
    out = []
    for kind in FAMILIES:
        problem = build_problem(random_family(kind, rng))
        out += check_block_assumptions(problem, rng, samples=20)
        out += check_gradients_fd(problem, rng, points=10)
    return out


def check_projection(rng):
    N, n = int(rng.integers(2, 12)), int(rng.integers(1, 5))
    v = 10.0 ** rng.uniform(-3, 3) * rng.standard_normal(N * n)
    p = project_to_S(v, N)
    pp = project_to_S(p, N)
    out = []
    if feasibility_violation(p, N) > 1e-9:
        out.append(f"projection infeasible: {feasibility_violation(p, N):.3e}")
    tol = 4 * N * np.spacing(np.max(np.abs(v)))
    if np.max(np.abs(pp - p)) > tol:
        out.append("projection not idempotent")
    return out


def check_kkt(rng):
    spec = random_family("quadratic", rng)
    x_star, _, _ = kkt_solve_quadratic(spec)
    out = []
    if feasibility_violation(x_star, spec.N) > 1e-12:
        out.append("optimum infeasible")
    if grad_residual(build_problem(spec), x_star) > 1e-10:
        out.append("gradients at the optimum are not equal")
    return out


def check_lemma1(rng):
    N, n = int(rng.integers(2, 7)), int(rng.integers(1, 5))
    basis = basis_vectors(N, n)
    out = []
    if np.any(basis.vectors.reshape(-1, N, n).sum(axis=1) != 0):
        out.append(f"basis vector outside S for N={N}, n={n}")
    x = random_point_in_S(rng, N, n)
    c = decompose(x, N)
    for y in (basis.reconstruct(c), reconstruct(c, N)):
        err = np.max(np.abs(y - x)) / max(1.0, np.max(np.abs(x)))
        if err > 1e-12:
            out.append(f"round trip error {err:.3e} for N={N}, n={n}")
    return out


def check_lemma2(rng):
    N, n = int(rng.integers(2, 13)), int(rng.integers(1, 6))
    L = 10.0 ** rng.uniform(-3, 3, N)
    x = random_point_in_S(rng, N, n)
    err = lemma2_error(L, x)
    return [f"operator identity error {err:.3e} (N={N}, n={n})"] if err > 1e-10 else []


def check_lemma3(rng):
    spec = random_family("quadratic", rng, multiplier=float(rng.uniform(1, 3)))
    problem = build_problem(spec)
    x_star, f_star, _ = kkt_solve_quadratic(spec)
    x0 = random_point_in_S(rng, spec.N, spec.n, scale=3.0)
    lhs, rhs = lemma3_check(problem, x0, x_star, f_star)
    return [f"initial gap {lhs} exceeds half radius {rhs}"] if lhs > rhs + 1e-10 else []


def check_descent(rng):
    out = []
    for kind in FAMILIES:
        spec = random_family(kind, rng)
        problem = build_problem(spec)
        x = random_point_in_S(rng, spec.N, spec.n, scale=2.0)
        i, j = sorted(rng.choice(spec.N, size=2, replace=False).tolist())
        actual, bound = descent_check(problem, x, i, j)
        f = abs(problem.value(x))
        if actual < bound - 1e-9 * (1 + f):
            out.append(f"{kind}: decrease {actual} below guaranteed {bound}")
        if kind == "quadratic" and abs(actual - bound) > 1e-9 * (1 + f):
            out.append(f"quadratic with tight L: decrease {actual} != {bound}")
    return out


def check_distribution(rng):
    N = int(rng.integers(2, 30))
    L = 10.0 ** rng.uniform(-3, 3, N)
    dist = build_distribution(L)
    out = []
    if len(dist) != N * (N - 1) // 2 or np.any(dist.probs <= 0):
        out.append("bad support")
    if abs(dist.probs.sum() - 1) > 1e-12 or abs(dist.cumulative[-1] - 1) > 1e-12:
        out.append("probabilities do not sum to one")
    if np.any(np.diff(dist.cumulative) <= 0):
        out.append("cumulative table not strictly increasing")
    inv = 1.0 / L
    for (i, j), p in zip(dist.pairs, dist.probs):
        if abs(p * (N - 1) * inv.sum() / (inv[i] + inv[j]) - 1) > 1e-12:
            out.append(f"pair ({i}, {j}) has wrong probability")
            break
    return out


def check_bound_order(rng):
    out = []
    N = int(rng.integers(2, 1000))
    mu = float(rng.uniform(1e-6, 1.0))
    if linear_factor(N, mu) > nng_linear_factor(N, mu):
        out.append(f"linear factor order fails at N={N}, mu={mu}")
    k = int(rng.integers(1, 10_000))
    t = float(10.0 ** rng.uniform(-3, 3))
    R = t * float(10.0 ** rng.uniform(0, 2))
    if bound_sublinear(k, N, t) > bound_nng_sublinear(k, N, R):
        out.append(f"sublinear bound order fails at N={N}, k={k}")
    if not bound_sublinear(k + 1, N, t) < bound_sublinear(k, N, t):
        out.append(f"sublinear bound not decreasing at N={N}, k={k}")
    return out


CHECKS = {
    "assumptions": check_assumptions,
    "projection": check_projection,
    "kkt": check_kkt,
    "lemma1": check_lemma1,
    "lemma2": check_lemma2,
    "lemma3": check_lemma3,
    "descent": check_descent,
    "distribution": check_distribution,
    "bounds": check_bound_order,
}


def instance_seed(base_seed, index):
    return splitmix64((int(base_seed) ^ int(index)) & MASK64)


def run_check(name, seed):
    return [Violation(name, seed, msg) for msg in CHECKS[name](np.random.default_rng(seed))]


def run_suite(base_seed=0, instances=100, only=None, stop_on_first=True):
    """Run every check on ``instances`` random instances.

    Returns the list of violations (only the first when ``stop_on_first``).
    """
    names = [only] if only else list(CHECKS)
    found = []
    for name, index in itertools.product(names, range(instances)):
        found += run_check(name, instance_seed(base_seed, index))
        if found and stop_on_first:
            return found[:1]
    return found
