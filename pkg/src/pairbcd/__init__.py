"""Randomized 2-block coordinate descent for separable convex problems with
the coupling constraint ``x_1 + ... + x_N = 0``, with tools to check the
method's convergence guarantees numerically."""

from .problem import (BlockProblem, InvalidInputError, ProblemFamilySpec,
                      UnsupportedProblemError, build_problem, grad_residual,
                      kkt_solve_quadratic, l_norm_sq, mu_f_quadratic, project_to_S,
                      R_sq_upper_quadratic, tilde_R_sq)
from .sampling import PairDistribution, RngState, build_distribution, sample_pair
from .solver import StoppingRule, Trajectory, direction, run, run_batch, step
from .theory import (basis_vectors, bound_linear, bound_nng_linear, bound_nng_sublinear,
                     bound_sublinear, compare_bounds, complexity_report, decompose,
                     descent_check, lemma2_apply, lemma3_check)
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import certify, run_replicas

__version__ = "0.1.0"
