"""Sparse and low-rank recovery with the rational penalty ``alpha|t| / (1 + alpha|t|)``.

Submodules: :mod:`penalty`, :mod:`linalg`, :mod:`cs_solver`, :mod:`mc_solver`,
:mod:`guarantees` and the experiment :mod:`harness`.
"""

from .cs_solver import CsProblem, CsSolution, default_lambda_cs, energy_cs, solve_cs, solve_cs_discrepancy
from .guarantees import (
    GuaranteeReport,
    nsp_probe_mat,
    nsp_probe_vec,
    rip_delta_exact,
    rip_delta_randomized,
    stability_constants,
    theta,
    verify_error_bound,
)
from .linalg import DenseMatrix, EntrySampler, MeasurementOp, cg_solve, soft_threshold_singular, soft_threshold_vec, svd
from .mc_solver import METHODS, McProblem, McSolution, default_lambda_mc, energy_mc, solve_mc
from .penalty import PenaltyParams, big_phi_mat, big_phi_vec, big_psi_mat, grad_big_psi_mat, grad_psi_vec, phi, psi, psi_prime
from .trace import LambdaSchedule, SolverDivergence, SolverTrace

__version__ = "0.1.0"
