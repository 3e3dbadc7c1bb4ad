"""Separable convex problems under the coupling constraint ``x_1 + ... + x_N = 0``.

Points are flat float arrays of length ``n * N`` holding ``N`` consecutive
blocks of size ``n``; ``x.reshape(N, n)[i]`` is block ``i``.  The feasible set
is the subspace ``S = {x : sum_i x_i = 0}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

FEAS_TOL = 1e-9

FAMILIES = ("quadratic", "pseudo_huber", "softplus")


class InvalidInputError(ValueError):
    """Raised for malformed arguments (shapes, ranges, non-finite data)."""


class UnsupportedProblemError(ValueError):
    """Raised when an analytic quantity is not available for a problem."""


# ---------------------------------------------------------------------------
# block oracles


@dataclass(frozen=True)
class QuadraticBlock:
    """``f(x) = a/2 ||x||^2 + <b, x>``."""

    a: float
    b: np.ndarray

    def __call__(self, x):
        value = 0.5 * self.a * np.sum(x * x) + np.sum(self.b * x)
        return float(value), self.a * x + self.b


@dataclass(frozen=True)
class PseudoHuberBlock:
    """``f(x) = w (sqrt(1 + ||x||^2) - 1)``."""

    w: float

    def __call__(self, x):
        s = np.sqrt(1.0 + np.sum(x * x))
        return float(self.w * (s - 1.0)), (self.w / s) * x


@dataclass(frozen=True)
class SoftplusBlock:
    """``f(x) = log(1 + exp(<c, x>))``."""

    c: np.ndarray

    def __call__(self, x):
        t = np.sum(self.c * x)
        return float(np.logaddexp(0.0, t)), expit(t) * self.c


@dataclass(frozen=True, eq=False)
class FamilyEvaluator:
    """Evaluates many (block index, point) pairs of one family at once.

    Uses the same elementwise arithmetic as the per-block oracles, so the
    lockstep replica engine reproduces sequential runs bit for bit.
    """

    kind: str
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    w: np.ndarray | None = None
    c: np.ndarray | None = None

    def __call__(self, idx, P):
        if self.kind == "quadratic":
            a, b = self.a[idx], self.b[idx]
            values = 0.5 * a * np.sum(P * P, axis=-1) + np.sum(b * P, axis=-1)
            return values, a[:, None] * P + b
        if self.kind == "pseudo_huber":
            w = self.w[idx]
            s = np.sqrt(1.0 + np.sum(P * P, axis=-1))
            return w * (s - 1.0), (w / s)[:, None] * P
        c = self.c[idx]
        t = np.sum(c * P, axis=-1)
        return np.logaddexp(0.0, t), expit(t)[:, None] * c

    @property
    def has_excess(self):
        return self.kind == "quadratic"

    def excess(self, X, X_star):
        """``sum_i a_i/2 ||x_i - x_i*||^2`` over the trailing (N, n) axes.

        Equals ``f(x) - f*`` for quadratics when x and x* lie in S (the
        linear term ``<nu, sum_i (x_i - x_i*)>`` vanishes there).
        """
        D = X - X_star
        return 0.5 * np.sum(self.a * np.sum(D * D, axis=-1), axis=-1)


# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True)
class ProblemFamilySpec:
    """Parameters of one of the built-in test families.

    Per-block arrays: ``a`` and ``w`` have shape ``(N,)``; ``b`` and ``c``
    have shape ``(N, n)``.  ``lipschitz`` overrides the analytic constants;
    otherwise they are the tight constants times ``lipschitz_multiplier``.
    """

    kind: str
    N: int
    n: int
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    w: np.ndarray | None = None
    c: np.ndarray | None = None
    lipschitz_multiplier: float = 1.0
    lipschitz: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise InvalidInputError(f"unknown problem kind {self.kind!r}")
        if self.N < 2 or self.n < 1:
            raise InvalidInputError(f"need N >= 2 and n >= 1, got N={self.N}, n={self.n}")
        if not self.lipschitz_multiplier >= 1.0:
            raise InvalidInputError("lipschitz_multiplier must be >= 1")
        shapes = {"a": (self.N,), "w": (self.N,), "b": (self.N, self.n), "c": (self.N, self.n)}
        required = {"quadratic": ("a", "b"), "pseudo_huber": ("w",), "softplus": ("c",)}[self.kind]
        for name, shape in shapes.items():
            value = getattr(self, name)
            if value is None:
                if name in required:
                    raise InvalidInputError(f"{self.kind} problem needs parameter {name!r}")
                continue
            value = np.asarray(value, dtype=float)
            if value.size != np.prod(shape):
                raise InvalidInputError(f"{name} has {value.size} entries, expected shape {shape}")
            if not np.all(np.isfinite(value)):
                raise InvalidInputError(f"{name} must be finite")
            object.__setattr__(self, name, value.reshape(shape))
        if self.kind == "quadratic" and np.any(self.a <= 0):
            raise UnsupportedProblemError(
                "quadratic curvatures must be positive (optimum not unique otherwise)")
        if self.kind == "pseudo_huber" and np.any(self.w <= 0):
            raise InvalidInputError("pseudo_huber weights must be positive")
        if self.lipschitz is not None:
            L = np.asarray(self.lipschitz, dtype=float).reshape(-1)
            if L.shape != (self.N,) or not np.all(L > 0):
                raise InvalidInputError("lipschitz override needs N positive entries")
            object.__setattr__(self, "lipschitz", L)

    def tight_lipschitz(self):
        if self.kind == "quadratic":
            return self.a.copy()
        if self.kind == "pseudo_huber":
            return self.w.copy()
        return np.einsum("ij,ij->i", self.c, self.c) / 4.0

    def lipschitz_constants(self):
        if self.lipschitz is not None:
            return self.lipschitz.copy()
        return self.tight_lipschitz() * self.lipschitz_multiplier


@dataclass(frozen=True, eq=False)
class BlockProblem:
    """``min sum_i f_i(x_i)`` subject to ``sum_i x_i = 0``.

    ``blocks[i](xi)`` returns ``(f_i(xi), grad f_i(xi))``.  Oracles must be
    pure functions so that seeded runs are reproducible.
    """

    N: int
    n: int
    blocks: tuple
    lipschitz: np.ndarray
    mu_f: float | None = None
    family: ProblemFamilySpec | None = field(default=None, repr=False)
    evaluator: FamilyEvaluator | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 2 or self.n < 1:
            raise InvalidInputError(f"need N >= 2 and n >= 1, got N={self.N}, n={self.n}")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.blocks) != self.N:
            raise InvalidInputError(f"expected {self.N} block oracles, got {len(self.blocks)}")
        L = np.array(self.lipschitz, dtype=float).reshape(-1)
        if L.shape != (self.N,) or not np.all(L > 0) or not np.all(np.isfinite(L)):
            raise InvalidInputError("lipschitz must hold N positive finite constants")
        L.setflags(write=False)
        object.__setattr__(self, "lipschitz", L)
        if self.mu_f is not None and not 0.0 <= self.mu_f <= 1.0:
            raise InvalidInputError("mu_f must lie in [0, 1]")

    @property
    def dim(self):
        return self.N * self.n

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InvalidInputError(f"point must have length {self.dim}, got shape {x.shape}")
        return x.reshape(self.N, self.n)

    def evaluate(self, x):
        """Return per-block values ``(N,)`` and gradients ``(N, n)``."""
        X = self.split(x)
        values = np.empty(self.N)
        grads = np.empty((self.N, self.n))
        for i, oracle in enumerate(self.blocks):
            values[i], grads[i] = oracle(X[i])
        return values, grads

    def value(self, x):
        return float(np.sum(self.evaluate(x)[0]))

    def gradient(self, x):
        return self.evaluate(x)[1].reshape(-1)

    @property
    def exact_gap(self):
        """True when ``gap`` can use the cancellation-free quadratic form."""
        return self.evaluator is not None and self.evaluator.has_excess

    def gap(self, x, x_star=None, f_star=None):
        """Optimality gap ``f(x) - f*`` of a feasible point.

        Quadratic families with a known optimum use ``sum_i a_i/2
        ||x_i - x_i*||^2``, equal to ``f(x) - f*`` on S and free of the
        cancellation that floors ``f(x) - f*`` at the rounding level of f.
        """
        if x_star is not None and self.exact_gap:
            return float(self.evaluator.excess(self.split(x), self.split(x_star)))
        if f_star is None:
            raise InvalidInputError("gap needs f_star (or x_star for quadratic problems)")
        return self.value(x) - f_star


def build_problem(spec: ProblemFamilySpec) -> BlockProblem:
    """Instantiate the block oracles and constants of a family spec."""
    if spec.kind == "quadratic":
        blocks = [QuadraticBlock(float(a), b.copy()) for a, b in zip(spec.a, spec.b)]
    elif spec.kind == "pseudo_huber":
        blocks = [PseudoHuberBlock(float(w)) for w in spec.w]
    else:
        blocks = [SoftplusBlock(c.copy()) for c in spec.c]
    L = spec.lipschitz_constants()
    if np.any(L <= 0):
        raise InvalidInputError("family produced a non-positive Lipschitz constant")
    mu = mu_f_quadratic(spec) if spec.kind == "quadratic" else None
    evaluator = FamilyEvaluator(spec.kind, a=spec.a, b=spec.b, w=spec.w, c=spec.c)
    return BlockProblem(spec.N, spec.n, tuple(blocks), L, mu_f=mu, family=spec,
                        evaluator=evaluator)


# ---------------------------------------------------------------------------
# subspace geometry


def _blocks(x, N):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or N < 1 or x.size % N:
        raise InvalidInputError(f"length {x.size} is not a multiple of N={N}")
    return x.reshape(N, -1)


def project_to_S(v, N):
    """Orthogonal projection onto S: subtract the block mean from every block."""
    V = _blocks(v, N)
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("cannot project a non-finite vector")
    return (V - V.mean(axis=0)).reshape(-1)


def feasibility_violation(x, N):
    """``||sum_i x_i||_inf`` scaled by ``max(1, max_i ||x_i||_inf)``."""
    X = _blocks(x, N)
    scale = max(1.0, float(np.max(np.abs(X))) if X.size else 0.0)
    return float(np.max(np.abs(X.sum(axis=0)))) / scale


def is_feasible(x, N, tol=FEAS_TOL):
    return feasibility_violation(x, N) <= tol


def l_norm_sq(x, L):
    """``||x||_L^2 = sum_i L_i ||x_i||^2``."""
    L = np.asarray(L, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if L.size == 0 or x.size % L.size:
        raise InvalidInputError(f"point of length {x.size} does not match {L.size} weights")
    X = x.reshape(L.size, -1)
    return float(np.sum(L * np.sum(X * X, axis=-1)))


def tilde_R_sq(x0, x_star, L):
    """Squared L-distance from the start to the (unique) optimum."""
    return l_norm_sq(np.asarray(x0, dtype=float) - np.asarray(x_star, dtype=float), L)


def grad_residual(problem: BlockProblem, x) -> float:
    """``max_{i<j} ||grad f_i(x_i) - grad f_j(x_j)||``; zero exactly at optima."""
    G = problem.evaluate(x)[1]
    return gradient_spread(G)


def gradient_spread(G):
    diff = G[:, None, :] - G[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


# ---------------------------------------------------------------------------
# closed forms for the quadratic family


def _require_quadratic(spec):
    if spec.kind != "quadratic":
        raise UnsupportedProblemError(
            f"analytic quantity only available for quadratics, not {spec.kind!r}")


def kkt_solve_quadratic(spec: ProblemFamilySpec):
    """Exact optimum of a quadratic instance.

    All block gradients equal a common ``nu`` at the optimum, so
    ``x_i* = (nu - b_i) / a_i`` with ``nu = (sum b_i/a_i) / (sum 1/a_i)``.

    Returns
    -------
    x_star : ndarray, shape (n*N,)
    f_star : float
    nu : ndarray, shape (n,)
    """
    _require_quadratic(spec)
    a, b = spec.a, spec.b
    if np.any(a <= 0):
        raise UnsupportedProblemError("non-positive curvature: optimal set not a singleton")
    inv_a = 1.0 / a
    nu = (inv_a @ b) / inv_a.sum()
    X = (nu[None, :] - b) * inv_a[:, None]
    # remove the O(eps) residual sum left by rounding
    X -= X.mean(axis=0)
    f_star = float(np.sum(0.5 * a * np.einsum("ij,ij->i", X, X) + np.einsum("ij,ij->i", b, X)))
    return X.reshape(-1), f_star, nu


def mu_f_quadratic(spec: ProblemFamilySpec) -> float:
    """Strong convexity of a quadratic w.r.t. ``||.||_L``: ``min_i a_i / L_i``."""
    _require_quadratic(spec)
    L = spec.lipschitz_constants()
    if np.any(L < spec.a * (1 - 1e-12)):
        raise InvalidInputError("declared Lipschitz constant below the block curvature")
    return float(min(1.0, np.min(spec.a / L)))


def R_sq_upper_quadratic(spec: ProblemFamilySpec, x0) -> float:
    """Upper bound on the squared level-set radius ``R(x0)^2`` for a quadratic.

    On S, ``f(x) - f* = 1/2 sum a_i ||x_i - x_i*||^2``; maximising
    ``sum L_i ||y_i||^2`` over that ellipsoid gives
    ``2 (f(x0) - f*) max_i L_i / a_i``.  This is not the exact radius.
    """
    _require_quadratic(spec)
    x_star, _, _ = kkt_solve_quadratic(spec)
    problem = build_problem(spec)
    gap0 = problem.gap(x0, x_star=x_star)
    return 2.0 * gap0 * float(np.max(spec.lipschitz_constants() / spec.a))


# ---------------------------------------------------------------------------
# sampled checks of the smoothness / convexity assumptions


def check_block_assumptions(problem: BlockProblem, rng, samples=100, scale=3.0, slack=1e-8):
    """Sample ``(x, d)`` per block and test the Lipschitz, quadratic upper
    bound and midpoint convexity inequalities.

    Returns a list of human-readable violations (empty when all hold).
    """
    failures = []
    for i, oracle in enumerate(problem.blocks):
        Li = problem.lipschitz[i]
        for s in range(samples):
            x = scale * rng.standard_normal(problem.n)
            d = scale * rng.standard_normal(problem.n) * 10.0 ** rng.uniform(-3, 1)
            fx, gx = oracle(x)
            fy, gy = oracle(x + d)
            dn = float(np.linalg.norm(d))
            lip = float(np.linalg.norm(gy - gx))
            if lip > Li * dn * (1 + slack) + 1e-300:
                failures.append(f"block {i} sample {s}: gradient Lipschitz {lip} > {Li * dn}")
            upper = fx + float(gx @ d) + 0.5 * Li * dn * dn
            if fy > upper + slack * max(1.0, abs(upper)):
                failures.append(f"block {i} sample {s}: quadratic upper bound {fy} > {upper}")
            fm, _ = oracle(x + 0.5 * d)
            if fm > 0.5 * (fx + fy) + slack * max(1.0, abs(fx), abs(fy)):
                failures.append(f"block {i} sample {s}: midpoint convexity violated")
    return failures


def check_gradients_fd(problem: BlockProblem, rng, points=50, h=1e-6, rtol=1e-6):
    """Compare each gradient oracle against central finite differences."""
    failures = []
    for i, oracle in enumerate(problem.blocks):
        for s in range(points):
            x = rng.standard_normal(problem.n)
            _, g = oracle(x)
            fd = np.empty(problem.n)
            for m in range(problem.n):
                e = np.zeros(problem.n)
                e[m] = h
                fd[m] = (oracle(x + e)[0] - oracle(x - e)[0]) / (2 * h)
            err = float(np.linalg.norm(fd - g))
            if err > rtol * max(1.0, float(np.linalg.norm(g))):
                failures.append(f"block {i} point {s}: finite-difference error {err:.3e}")
    return failures


def make_problem(blocks: Sequence[Callable], lipschitz, n, mu_f=None) -> BlockProblem:
    """Wrap user-supplied oracles; ``mu_f`` must be supplied by the caller."""
    return BlockProblem(len(blocks), n, tuple(blocks), np.asarray(lipschitz, dtype=float), mu_f=mu_f)
