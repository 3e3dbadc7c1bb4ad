"""Numerical checks of the structural lemmas, plus rate bounds and
iteration complexities for the 2-block method and for the earlier analysis
it is compared against (labelled ``nng`` throughout).

All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import (BlockProblem, InvalidInputError, FEAS_TOL, feasibility_violation,
                      tilde_R_sq)
from .sampling import build_distribution
from .solver import step


# ---------------------------------------------------------------------------
# basis of S


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Vectors ``(e_l - e_{l+1}) kron e~_m``; row ``l * n + m`` holds ``v_lm``."""

    N: int
    n: int
    vectors: np.ndarray

    def __len__(self):
        return self.vectors.shape[0]

    def reconstruct(self, coeffs):
        c = np.asarray(coeffs, dtype=float).reshape(-1)
        return c @ self.vectors


def basis_vectors(N, n) -> BasisSet:
    if N < 2 or n < 1:
        raise InvalidInputError(f"need N >= 2 and n >= 1, got N={N}, n={n}")
    diff = np.eye(N - 1, N) - np.eye(N - 1, N, k=1)
    vectors = np.kron(diff, np.eye(n))
    vectors.setflags(write=False)
    return BasisSet(N, n, vectors)


def decompose(x, N, tol=FEAS_TOL):
    """Coordinates of ``x`` in the basis: ``c_lm = <e~_m, x_1 + ... + x_l>``.

    Returns an ``(N - 1, n)`` array.
    """
    x = np.asarray(x, dtype=float)
    if feasibility_violation(x, N) > tol:
        raise InvalidInputError("decomposition is only defined on S")
    X = x.reshape(N, -1)
    return np.cumsum(X[:-1], axis=0)


def reconstruct(coeffs, N):
    """Inverse of ``decompose`` without materialising the basis."""
    C = np.asarray(coeffs, dtype=float)
    X = np.zeros((N, C.shape[1]))
    X[:-1] += C
    X[1:] -= C
    return X.reshape(-1)


# ---------------------------------------------------------------------------
# the averaged pair operator


def lemma2_apply(L, x):
    """Apply ``sum_E p_ij/(L_i+L_j) (e_i - e_j)(L_i e_i^T - L_j e_j^T) kron I_n``.

    Evaluated as |E| rank-one block actions; on S the result is
    ``x / (N - 1)``.
    """
    L = np.asarray(L, dtype=float).reshape(-1)
    N = L.size
    dist = build_distribution(L, N)
    X = np.asarray(x, dtype=float).reshape(N, -1)
    I, J = np.asarray(dist.pairs).T
    coef = dist.probs / (L[I] + L[J])
    W = coef[:, None] * (L[I, None] * X[I] - L[J, None] * X[J])
    out = np.zeros_like(X)
    np.add.at(out, I, W)
    np.add.at(out, J, -W)
    return out.reshape(-1)


def lemma2_error(L, x):
    """``||lemma2_apply(L, x) - x/(N-1)|| / max(1, ||x||)``."""
    L = np.asarray(L, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float)
    err = np.linalg.norm(lemma2_apply(L, x) - x / (L.size - 1))
    return float(err / max(1.0, np.linalg.norm(x)))


# ---------------------------------------------------------------------------
# descent and initial-gap checks


def descent_check(problem: BlockProblem, x, i, j):
    """``(actual decrease, guaranteed decrease)`` of one step on ``(i, j)``.

    The guaranteed decrease is ``||grad f_i - grad f_j||^2 / (2 (L_i + L_j))``.
    Only blocks ``i`` and ``j`` change, so the decrease is computed from
    those two terms.
    """
    x_new = step(problem, x, i, j)
    X, Xn = problem.split(x), problem.split(x_new)
    fi, gi = problem.blocks[i](X[i])
    fj, gj = problem.blocks[j](X[j])
    fi_new, _ = problem.blocks[i](Xn[i])
    fj_new, _ = problem.blocks[j](Xn[j])
    g = gi - gj
    bound = float(g @ g) / (2.0 * (problem.lipschitz[i] + problem.lipschitz[j]))
    return (fi + fj) - (fi_new + fj_new), bound


def lemma3_check(problem: BlockProblem, x0, x_star, f_star):
    """``(f(x0) - f*, tilde_R^2 / 2)``; the first never exceeds the second."""
    return problem.value(x0) - f_star, 0.5 * tilde_R_sq(x0, x_star, problem.lipschitz)


# ---------------------------------------------------------------------------
# expectation bounds


def _check_N(N):
    if N < 2:
        raise InvalidInputError("need N >= 2")


def _check_mu(mu_f):
    if not 0.0 < mu_f <= 1.0:
        raise InvalidInputError(f"mu_f must lie in (0, 1], got {mu_f}")


def linear_factor(N, mu_f):
    """Per-iteration contraction ``1 - 2 mu / ((N-1)(1+mu))``."""
    _check_N(N)
    _check_mu(mu_f)
    return 1.0 - 2.0 * mu_f / ((N - 1) * (1.0 + mu_f))


def nng_linear_factor(N, mu_f):
    """Earlier contraction ``1 - mu / (N-1)``."""
    _check_N(N)
    _check_mu(mu_f)
    return 1.0 - mu_f / (N - 1)


def bound_sublinear(k, N, tilde_R_sq):
    _check_N(N)
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return (N - 1) / (N + k - 1) * tilde_R_sq


def bound_linear(k, N, mu_f, tilde_R_sq):
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return linear_factor(N, mu_f) ** k * tilde_R_sq


def bound_nng_sublinear(k, N, R_sq):
    _check_N(N)
    if k < 1:
        raise InvalidInputError("the 2(N-1)R^2/k bound is undefined at k = 0")
    return 2.0 * (N - 1) * R_sq / k


def bound_nng_linear(k, N, mu_f, gap0):
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return nng_linear_factor(N, mu_f) ** k * gap0


@dataclass(frozen=True)
class BoundSet:
    """Bound envelopes over ``k = 0..K``; NaN marks undefined entries
    (``nng_sublinear`` at k = 0, linear bounds without ``mu_f``)."""

    k: np.ndarray
    ours_sublinear: np.ndarray
    ours_linear: np.ndarray
    nng_sublinear: np.ndarray
    nng_linear: np.ndarray
    N: int
    mu_f: float | None
    tilde_R_sq: float
    R_sq: float | None
    gap0: float | None

    COLUMNS = ("k", "ours_sublinear", "ours_linear", "nng_sublinear", "nng_linear")

    def rows(self):
        return zip(*(getattr(self, c) for c in self.COLUMNS))


def bound_values(k, N, tilde_R_sq, R_sq=None, mu_f=None, gap0=None):
    """The four bound values at a single ``k`` (NaN when undefined)."""
    nan = math.nan
    return (
        bound_sublinear(k, N, tilde_R_sq),
        bound_linear(k, N, mu_f, tilde_R_sq) if mu_f else nan,
        bound_nng_sublinear(k, N, R_sq) if (R_sq is not None and k >= 1) else nan,
        bound_nng_linear(k, N, mu_f, gap0) if (mu_f and gap0 is not None) else nan,
    )


def bound_set(K, N, tilde_R_sq, R_sq=None, mu_f=None, gap0=None, ks=None) -> BoundSet:
    ks = np.arange(K + 1) if ks is None else np.asarray(sorted(ks), dtype=int)
    table = np.array([bound_values(int(k), N, tilde_R_sq, R_sq, mu_f, gap0) for k in ks])
    table = table.reshape(len(ks), 4)
    return BoundSet(ks, *table.T, N=N, mu_f=mu_f, tilde_R_sq=tilde_R_sq, R_sq=R_sq, gap0=gap0)


def compare_bounds(N, k, R_sq, tilde_R_sq):
    """Ratio of the earlier sublinear bound to ours at iteration ``k``."""
    _check_N(N)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if not tilde_R_sq > 0:
        raise InvalidInputError("tilde_R_sq must be positive")
    if R_sq < tilde_R_sq:
        raise InvalidInputError("R^2 below tilde_R^2 contradicts R >= tilde_R")
    return 2.0 * ((N - 1) / k + 1.0) * R_sq / tilde_R_sq


# ---------------------------------------------------------------------------
# iteration complexities


@dataclass(frozen=True)
class ComplexityReport:
    """Iterations after which ``P[f(x^k) - f* <= eps] >= 1 - rho``.

    ``K`` / ``K_tilde`` are the sharper counts (convex / strongly convex);
    ``K_bar`` / ``K_hat`` follow from the earlier analysis.  Raw values are
    real thresholds and may be negative; see ``display``.
    """

    N: int
    R_sq: float
    tilde_R_sq: float
    eps: float
    rho: float
    gap0: float
    mu_f: float | None
    K: float
    K_bar: float
    K_tilde: float | None = None
    K_hat: float | None = None

    @staticmethod
    def display(value):
        return None if value is None else max(0, math.ceil(value))

    @property
    def K_bar_minus_K(self):
        return self.K_bar - self.K

    @property
    def K_hat_over_K_tilde(self):
        if self.K_tilde is None or self.K_tilde == 0:
            return None
        return self.K_hat / self.K_tilde

    def lines(self):
        out = [f"N={self.N}", f"R_sq={self.R_sq:.17g}", f"tilde_R_sq={self.tilde_R_sq:.17g}",
               f"eps={self.eps:.17g}", f"rho={self.rho:.17g}", f"gap0={self.gap0:.17g}",
               f"mu_f={'' if self.mu_f is None else format(self.mu_f, '.17g')}"]
        for name in ("K", "K_bar", "K_tilde", "K_hat"):
            raw = getattr(self, name)
            out.append(f"{name}={'' if raw is None else format(raw, '.17g')}")
            out.append(f"{name}_ceil={'' if raw is None else self.display(raw)}")
        out.append(f"K_bar_minus_K={self.K_bar_minus_K:.17g}")
        ratio = self.K_hat_over_K_tilde
        out.append(f"K_hat_over_K_tilde={'' if ratio is None else format(ratio, '.17g')}")
        return out


def complexity_K(N, R_sq, tilde_R_sq, eps, rho):
    return (2.0 * (N - 1) * R_sq / eps
            * (1.0 + math.log(tilde_R_sq / (2.0 * R_sq * rho))) - N + 3)


def complexity_K_bar(N, R_sq, eps, rho):
    return 2.0 * (N - 1) * R_sq / eps * (1.0 + math.log(1.0 / rho)) + 2


def complexity_K_tilde(N, mu_f, tilde_R_sq, eps, rho):
    _check_mu(mu_f)
    return (N - 1) * (1.0 + mu_f) / (2.0 * mu_f) * math.log(tilde_R_sq / (rho * eps))


def complexity_K_hat(N, mu_f, gap0, eps, rho):
    _check_mu(mu_f)
    return (N - 1) / mu_f * math.log(gap0 / (eps * rho))


def complexity_report(N, R_sq, tilde_R_sq, eps, rho, gap0, mu_f=None) -> ComplexityReport:
    _check_N(N)
    if not 0.0 < eps < gap0:
        raise InvalidInputError(f"eps must lie in (0, gap0={gap0}), got {eps}")
    if not 0.0 < rho < 1.0:
        raise InvalidInputError(f"rho must lie in (0, 1), got {rho}")
    if not (R_sq > 0 and tilde_R_sq > 0):
        raise InvalidInputError("R_sq and tilde_R_sq must be positive")
    kw = {}
    if mu_f is not None:
        kw = dict(K_tilde=complexity_K_tilde(N, mu_f, tilde_R_sq, eps, rho),
                  K_hat=complexity_K_hat(N, mu_f, gap0, eps, rho))
    return ComplexityReport(
        N=N, R_sq=R_sq, tilde_R_sq=tilde_R_sq, eps=eps, rho=rho, gap0=gap0, mu_f=mu_f,
        K=complexity_K(N, R_sq, tilde_R_sq, eps, rho),
        K_bar=complexity_K_bar(N, R_sq, eps, rho), **kw)
