import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pairbcd.problem import (FAMILIES, InvalidInputError, ProblemFamilySpec,
                             UnsupportedProblemError, build_problem, check_block_assumptions,
                             check_gradients_fd, feasibility_violation, grad_residual,
                             is_feasible, kkt_solve_quadratic, l_norm_sq, make_problem,
                             mu_f_quadratic, project_to_S, R_sq_upper_quadratic, tilde_R_sq)
from pairbcd.theory import lemma3_check
from pairbcd.verify import random_family

from conftest import quadratic, random_feasible

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- projection

def test_project_subtracts_block_mean():
    assert np.array_equal(project_to_S([1.0, 2.0, 3.0], 3), [-1.0, 0.0, 1.0])


def test_project_constant_vector_vanishes():
    assert np.array_equal(project_to_S(np.full(8, 3.5), 4), np.zeros(8))


def test_project_point_of_S_unchanged():
    x = np.array([1.0, -2.0, 0.5, 2.0, -1.5, 0.0])
    assert np.array_equal(project_to_S(x, 3), x)


def test_project_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        project_to_S([1.0, np.nan], 2)
    with pytest.raises(InvalidInputError):
        project_to_S([1.0, 2.0, 3.0], 2)


@given(st.integers(2, 8), st.integers(1, 4), st.data())
def test_projection_idempotent_and_feasible(N, n, data):
    v = data.draw(arrays(float, N * n, elements=finite))
    p = project_to_S(v, N)
    pp = project_to_S(p, N)
    assert feasibility_violation(p, N) <= 1e-9
    # the leftover of the first projection is rounding noise at the scale of v
    ulp = np.spacing(np.max(np.abs(v)))
    assert np.max(np.abs(pp - p)) <= N * ulp


@given(st.integers(2, 8), st.integers(1, 4), st.data())
def test_projection_is_orthogonal(N, n, data):
    v = data.draw(arrays(float, N * n, elements=st.floats(-100, 100)))
    p = project_to_S(v, N)
    r = (v - p).reshape(N, n)
    # the removed part is constant across blocks, i.e. it lies in the complement of S
    assert np.allclose(r, r[0], atol=1e-9)


# ---------------------------------------------------------------- norms and radii

def test_l_norm_examples():
    assert l_norm_sq([1.0, 0.0, -1.0], [1.0, 2.0, 4.0]) == 5.0
    assert l_norm_sq(np.zeros(6), [1.0, 2.0, 3.0]) == 0.0
    x = np.arange(6.0)
    assert l_norm_sq(x, np.ones(3)) == pytest.approx(float(x @ x))


def test_l_norm_length_mismatch():
    with pytest.raises(InvalidInputError):
        l_norm_sq([1.0, 2.0, 3.0], [1.0, 1.0])


def test_tilde_radius_examples():
    assert tilde_R_sq([1.0, 0.0, -1.0], np.zeros(3), np.ones(3)) == 2.0
    assert tilde_R_sq([1.0, -1.0], [1.0, -1.0], [1.0, 3.0]) == 0.0
    assert tilde_R_sq([1.0, -1.0], [-1.0, 1.0], [1.0, 3.0]) == 16.0


# ---------------------------------------------------------------- quadratic optimum

def test_kkt_examples():
    x, f, nu = kkt_solve_quadratic(quadratic([1, 1], [1, -1]))
    assert np.allclose(nu, [0.0]) and np.allclose(x, [-1.0, 1.0]) and f == pytest.approx(-1.0)

    x, f, nu = kkt_solve_quadratic(quadratic([1, 2, 3], np.zeros(6), n=2))
    assert np.array_equal(x, np.zeros(6)) and f == 0.0

    x, f, nu = kkt_solve_quadratic(quadratic([1, 2], [3, 0]))
    assert nu == pytest.approx([2.0]) and np.allclose(x, [-1.0, 1.0])
    assert f == pytest.approx(-1.5)


def test_nonpositive_curvature_rejected():
    with pytest.raises(UnsupportedProblemError):
        quadratic([1.0, 0.0], [1.0, 1.0])


def test_kkt_needs_quadratic():
    spec = ProblemFamilySpec("pseudo_huber", 3, 1, w=[1.0, 2.0, 3.0])
    with pytest.raises(UnsupportedProblemError):
        kkt_solve_quadratic(spec)
    with pytest.raises(UnsupportedProblemError):
        R_sq_upper_quadratic(spec, np.zeros(3))


def _kkt_linear_system(spec):
    """Solve the Lagrangian stationarity system directly (independent route)."""
    N, n = spec.N, spec.n
    H = np.kron(np.diag(spec.a), np.eye(n))
    A = np.kron(np.ones((1, N)), np.eye(n))
    K = np.block([[H, A.T], [A, np.zeros((n, n))]])
    rhs = np.concatenate([-spec.b.reshape(-1), np.zeros(n)])
    sol = np.linalg.solve(K, rhs)
    x = sol[:N * n]
    return x, float(0.5 * x @ H @ x + spec.b.reshape(-1) @ x)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kkt_matches_linear_system(seed):
    rng = np.random.default_rng(seed)
    spec = random_family("quadratic", rng)
    x, f, nu = kkt_solve_quadratic(spec)
    x_ref, f_ref = _kkt_linear_system(spec)
    assert np.allclose(x, x_ref, rtol=1e-9, atol=1e-9)
    assert f == pytest.approx(f_ref, rel=1e-9, abs=1e-9)
    assert np.max(np.abs(x.reshape(spec.N, spec.n).sum(axis=0))) <= 1e-12
    assert grad_residual(build_problem(spec), x) <= 1e-10


# ---------------------------------------------------------------- residual

def test_grad_residual_examples():
    spec = quadratic([1, 1], [1, -1])
    assert grad_residual(build_problem(spec), np.array([-1.0, 1.0])) == 0.0
    spec = quadratic([1, 1, 1], [0, 0, 0])
    assert grad_residual(build_problem(spec), np.array([1.0, 0.0, -1.0])) == 2.0
    spec = quadratic([2, 1], [0, 1])
    assert grad_residual(build_problem(spec), np.array([1.0, -1.0])) == 2.0
    assert grad_residual(build_problem(spec), np.array([0.5, -0.5])) == 0.5
    spec = quadratic([1, 1], [0, 2])
    assert grad_residual(build_problem(spec), np.array([1.0, -1.0])) == 0.0


# ---------------------------------------------------------------- strong convexity

def test_mu_examples():
    assert mu_f_quadratic(quadratic(np.ones(4), np.zeros(4))) == 1.0
    assert mu_f_quadratic(quadratic([1, 2, 4], np.zeros(3))) == 1.0
    assert mu_f_quadratic(quadratic([1, 2], [0, 0], lipschitz=[2, 2])) == 0.5


def test_mu_rejects_lipschitz_below_curvature():
    with pytest.raises(InvalidInputError):
        mu_f_quadratic(quadratic([1, 2], [0, 0], lipschitz=[0.5, 2]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0))
def test_mu_is_largest_valid_modulus(seed, mult):
    rng = np.random.default_rng(seed)
    spec = random_family("quadratic", rng, multiplier=mult)
    problem = build_problem(spec)
    mu = mu_f_quadratic(spec)
    L = problem.lipschitz

    def excess(x, y):
        return problem.value(y) - problem.value(x) - problem.gradient(x) @ (y - x)

    for _ in range(5):
        x = rng.standard_normal(problem.dim)
        y = rng.standard_normal(problem.dim)
        lhs, rhs = excess(x, y), 0.5 * mu * l_norm_sq(y - x, L)
        assert lhs >= rhs - 1e-9 * (1 + abs(lhs))
    # equality along the block with the smallest a_i / L_i
    k = int(np.argmin(spec.a / L))
    x = rng.standard_normal(problem.dim)
    y = x.copy()
    y.reshape(spec.N, spec.n)[k] += 1.0
    assert excess(x, y) == pytest.approx(0.5 * mu * l_norm_sq(y - x, L), rel=1e-8)


# ---------------------------------------------------------------- level-set radius

def test_R_upper_examples():
    spec = quadratic(np.ones(3), [1.0, -2.0, 0.5])
    problem = build_problem(spec)
    x_star, f_star, _ = kkt_solve_quadratic(spec)
    x0 = np.array([2.0, 0.0, -2.0])
    gap0 = problem.value(x0) - f_star
    assert R_sq_upper_quadratic(spec, x0) == pytest.approx(2 * gap0)
    assert R_sq_upper_quadratic(spec, x0) == pytest.approx(tilde_R_sq(x0, x_star, problem.lipschitz))
    assert R_sq_upper_quadratic(spec, x_star) == 0.0

    spec = quadratic([1, 1], [0, 0], lipschitz=[2, 4])
    x0 = np.array([1.0, -1.0])  # f(x0) - f* = 1
    assert build_problem(spec).value(x0) == 1.0
    assert R_sq_upper_quadratic(spec, x0) == pytest.approx(8.0)


def _exact_R_sq(spec, x0):
    """R^2 as a generalized eigenproblem restricted to S."""
    problem = build_problem(spec)
    x_star, f_star, _ = kkt_solve_quadratic(spec)
    gap0 = problem.value(x0) - f_star
    n = spec.n
    B = scipy.linalg.null_space(np.kron(np.ones((1, spec.N)), np.eye(n)))
    DL = np.kron(np.diag(problem.lipschitz), np.eye(n))
    DA = np.kron(np.diag(spec.a), np.eye(n))
    lam = scipy.linalg.eigh(B.T @ DL @ B, B.T @ DA @ B, eigvals_only=True)[-1]
    return 2 * gap0 * lam


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 3.0))
def test_R_upper_dominates_exact_radius(seed, mult):
    rng = np.random.default_rng(seed)
    spec = random_family("quadratic", rng, multiplier=mult)
    problem = build_problem(spec)
    x0 = random_feasible(rng, spec.N, spec.n, 2.0)
    x_star, _, _ = kkt_solve_quadratic(spec)
    upper = R_sq_upper_quadratic(spec, x0)
    exact = _exact_R_sq(spec, x0)
    tilde = tilde_R_sq(x0, x_star, problem.lipschitz)
    assert tilde <= exact * (1 + 1e-8) + 1e-12
    assert exact <= upper * (1 + 1e-8) + 1e-12


# ---------------------------------------------------------------- initial gap vs radius

def test_initial_gap_examples():
    spec = quadratic(np.ones(3), np.zeros(3))
    x0 = np.array([1.0, 0.0, -1.0])
    assert lemma3_check(build_problem(spec), x0, np.zeros(3), 0.0) == (1.0, 1.0)
    assert lemma3_check(build_problem(spec), np.zeros(3), np.zeros(3), 0.0) == (0.0, 0.0)
    loose = quadratic(np.ones(3), np.zeros(3), lipschitz_multiplier=2.0)
    assert lemma3_check(build_problem(loose), x0, np.zeros(3), 0.0) == (1.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 3.0))
def test_initial_gap_below_half_radius(seed, mult):
    rng = np.random.default_rng(seed)
    spec = random_family("quadratic", rng, multiplier=mult)
    problem = build_problem(spec)
    x_star, f_star, _ = kkt_solve_quadratic(spec)
    x0 = random_feasible(rng, spec.N, spec.n, 3.0)
    lhs, rhs = lemma3_check(problem, x0, x_star, f_star)
    assert lhs <= rhs + 1e-10


# ---------------------------------------------------------------- oracles

@pytest.mark.parametrize("kind", FAMILIES)
def test_block_assumptions_hold(kind):
    rng = np.random.default_rng(7)
    for _ in range(3):
        problem = build_problem(random_family(kind, rng))
        assert check_block_assumptions(problem, rng, samples=100) == []


@pytest.mark.parametrize("kind", FAMILIES)
def test_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(8)
    problem = build_problem(random_family(kind, rng))
    assert check_gradients_fd(problem, rng, points=50) == []


def test_assumption_check_catches_understated_constant():
    blocks = build_problem(quadratic([4.0, 4.0], np.zeros(4), n=2)).blocks
    problem = make_problem(blocks, [1.0, 1.0], 2)
    assert check_block_assumptions(problem, np.random.default_rng(0), samples=5)


def test_evaluator_matches_block_oracles():
    rng = np.random.default_rng(3)
    for kind in FAMILIES:
        problem = build_problem(random_family(kind, rng, N=5, n=3))
        x = rng.standard_normal(15)
        values, grads = problem.evaluate(x)
        v2, g2 = problem.evaluator(np.arange(5), x.reshape(5, 3))
        assert np.array_equal(values, v2) and np.array_equal(grads, g2)


def test_exact_gap_equals_value_difference():
    rng = np.random.default_rng(4)
    spec = random_family("quadratic", rng, N=6, n=2)
    problem = build_problem(spec)
    x_star, f_star, _ = kkt_solve_quadratic(spec)
    x = random_feasible(rng, 6, 2)
    assert problem.gap(x, x_star=x_star) == pytest.approx(problem.value(x) - f_star, rel=1e-9)
    with pytest.raises(InvalidInputError):
        problem.gap(x)


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        ProblemFamilySpec("cubic", 3, 1)
    with pytest.raises(InvalidInputError):
        ProblemFamilySpec("pseudo_huber", 1, 1, w=[1.0])
    with pytest.raises(InvalidInputError):
        ProblemFamilySpec("pseudo_huber", 2, 1, w=[1.0, 2.0], lipschitz_multiplier=0.5)
    with pytest.raises(InvalidInputError):
        ProblemFamilySpec("softplus", 2, 2, c=np.ones(3))


def test_tight_lipschitz_constants():
    spec = ProblemFamilySpec("softplus", 2, 2, c=[[2.0, 0.0], [1.0, 1.0]])
    assert np.allclose(spec.lipschitz_constants(), [1.0, 0.5])
    spec = ProblemFamilySpec("pseudo_huber", 2, 1, w=[3.0, 5.0], lipschitz_multiplier=2)
    assert np.allclose(spec.lipschitz_constants(), [6.0, 10.0])


def test_problem_does_not_freeze_caller_array():
    L = np.array([1.0, 2.0])
    problem = make_problem(build_problem(quadratic([1, 2], [0, 0])).blocks, L, 1)
    L[0] = 5.0
    assert problem.lipschitz[0] == 1.0


def test_feasibility_helpers():
    assert is_feasible(np.array([1.0, -1.0]), 2)
    assert not is_feasible(np.array([1.0, -0.5]), 2)
