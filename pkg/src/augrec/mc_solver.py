"""Alternating minimization for augmented nuclear-norm matrix recovery.

Energy::

    E(X, W) = 1/2 ||A(X) - b||^2 + lam (1 + alpha beta) ||W||_*
              + lam beta Psi(X) + rho/2 ||X - W||_F^2

``W`` is updated by singular value thresholding at ``lam (1 + alpha beta) / rho``;
``X`` by the quasi-Newton step ``(A*A + rho I) dX = -grad_X E`` solved with
conjugate gradients. One SVD per iteration is shared between the energy, the
thresholding and the gradient of the spectral remainder.

Three comparison modes are exposed through :data:`METHODS`: the augmented
model ("N-Nuclear"), the plain nuclear norm (``beta = 0``) and the augmented
nuclear norm with a sharp penalty (``alpha = 50``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import EntrySampler, MeasurementOp, SvdFactors, cg_solve, soft_threshold_singular, svd
from .penalty import PenaltyParams, phi, psi_prime
from .trace import LambdaSchedule, SolverDivergence, SolverTrace

__all__ = [
    "McProblem",
    "McSolution",
    "METHODS",
    "energy_mc",
    "w_step",
    "x_step",
    "solve_mc",
    "criticality_residual_mc",
    "default_lambda_mc",
    "mc_schedule",
]

log = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10
MAX_BACKTRACKS = 10

METHODS = {
    "N-Nuclear": (0.5, 0.1),
    "Nuclear": (0.5, 0.0),
    "Aug-Nuclear": (50.0, 1.0 / (20 * 50.0)),
}


@dataclass
class McProblem:
    """Matrix recovery instance with final regularization weight ``lam``."""

    op: MeasurementOp
    b: np.ndarray
    lam: float
    rho: float = 1.0
    penalty: PenaltyParams = None

    def __post_init__(self):
        if self.penalty is None:
            self.penalty = PenaltyParams()
        if len(self.op.domain_shape) != 2:
            raise ValueError("operator domain must be a matrix")
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.b.shape != (self.op.n_obs,):
            raise ValueError(f"b has length {self.b.size}, expected {self.op.n_obs}")
        if self.op.n_obs > int(np.prod(self.op.domain_shape)):
            raise ValueError("more observations than matrix entries")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def shape(self) -> tuple:
        return self.op.domain_shape

    def threshold(self, lam: float) -> float:
        return lam * (1.0 + self.penalty.alpha * self.penalty.beta) / self.rho


class McSolution(NamedTuple):
    X: np.ndarray
    W: np.ndarray
    trace: SolverTrace


def _coupling(op, rho):
    return rho / (rho + op.norm_sq())


def default_lambda_mc(op: MeasurementOp, b, rho: float = 1.0, floor: float = 1e-4) -> float:
    """Final weight ``floor * ||A* b||_2`` (spectral norm), coupling-corrected."""
    lam0 = float(np.linalg.norm(op.adjoint(b), 2)) * _coupling(op, rho)
    return floor * lam0 if lam0 > 0 else floor * _coupling(op, rho)


def mc_schedule(prob: McProblem, continuation: bool = True) -> LambdaSchedule:
    """Decay by 0.7 every 25 iterations from the coupled ``||A* b||_2`` down to ``prob.lam``."""
    if not continuation:
        return LambdaSchedule.constant(prob.lam)
    lam0 = float(np.linalg.norm(prob.op.adjoint(prob.b), 2)) * _coupling(prob.op, prob.rho)
    return LambdaSchedule(max(lam0, prob.lam), prob.lam, factor=0.7, every=25)


def _psi_sum(sigma, pen):
    return float(np.sum(phi(sigma, pen)) - pen.alpha * np.sum(sigma))


def _energy(X, W, nuc_w, psi_x, prob, lam):
    r = prob.op.apply(X) - prob.b
    d = X - W
    a, b = prob.penalty.alpha, prob.penalty.beta
    return float(0.5 * (r @ r) + lam * (1.0 + a * b) * nuc_w + lam * b * psi_x + 0.5 * prob.rho * np.vdot(d, d))


def energy_mc(X, W, prob: McProblem, lam: float | None = None) -> float:
    """Surrogate energy evaluated term by term."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    if X.shape != prob.shape or W.shape != prob.shape:
        raise ValueError(f"X and W must have shape {prob.shape}, got {X.shape} and {W.shape}")
    lam = prob.lam if lam is None else lam
    nuc_w = float(np.sum(np.linalg.svd(W, compute_uv=False)))
    psi_x = _psi_sum(np.linalg.svd(X, compute_uv=False), prob.penalty)
    return _energy(X, W, nuc_w, psi_x, prob, lam)


def w_step(X, prob: McProblem, lam: float | None = None, factors: SvdFactors | None = None):
    """Exact minimizer of the energy over ``W`` for fixed ``X``."""
    lam = prob.lam if lam is None else lam
    return soft_threshold_singular(X, prob.threshold(lam), factors)


class _XUpdate(NamedTuple):
    X: np.ndarray
    factors: SvdFactors
    energy: float
    step: np.ndarray
    backtracks: int
    cg_iterations: int
    cg_converged: bool


def _x_update(X, fx, W, nuc_w, prob, lam, cg_tol, e_ref=None):
    pen = prob.penalty
    op, rho = prob.op, prob.rho
    grad_psi = (fx.U * psi_prime(fx.sigma, pen)) @ fx.V.T
    grad = op.adjoint(op.apply(X) - prob.b) + lam * pen.beta * grad_psi + rho * (X - W)
    cg = cg_solve(op.gram_shifted(rho), -grad, tol=cg_tol)
    if not cg.converged:
        log.debug("cg did not converge (residual %.3e)", cg.residual)
    if e_ref is None:
        e_ref = _energy(X, W, nuc_w, _psi_sum(fx.sigma, pen), prob, lam)
    dX = cg.x
    bt = 0
    while True:
        X_new = X + dX
        f_new = svd(X_new) if np.all(np.isfinite(X_new)) else None
        e_new = _energy(X_new, W, nuc_w, _psi_sum(f_new.sigma, pen), prob, lam) if f_new else np.nan
        if not np.isfinite(e_new):
            raise SolverDivergence(f"energy became {e_new} (lam={lam:.3e})")
        if e_new <= e_ref + ENERGY_SLACK:
            break
        if bt == MAX_BACKTRACKS:
            log.warning("no descent after %d halvings; step rejected", bt)
            dX = np.zeros_like(X)
            X_new, f_new, e_new = X, fx, e_ref
            break
        bt += 1
        dX = 0.5 * dX
    if bt:
        log.info("%d step halvings", bt)
    return _XUpdate(X_new, f_new, e_new, dX, bt, cg.iterations, cg.converged)


def x_step(X, W, prob: McProblem, lam: float | None = None, cg_tol: float = 1e-10):
    """One guarded quasi-Newton step on ``X`` with ``W`` held fixed."""
    lam = prob.lam if lam is None else lam
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    nuc_w = float(np.sum(np.linalg.svd(W, compute_uv=False)))
    return _x_update(X, svd(X), W, nuc_w, prob, lam, cg_tol).X


def criticality_residual_mc(X, X_prev, prob: McProblem, lam: float | None = None, factors=None, factors_prev=None) -> float:
    """``rho ||X_prev - X||_F + lam beta ||G(X) - G(X_prev)||_F`` with ``G`` the spectral-remainder gradient."""
    lam = prob.lam if lam is None else lam
    pen = prob.penalty
    f = factors if factors is not None else svd(X)
    fp = factors_prev if factors_prev is not None else svd(X_prev)
    g = (f.U * psi_prime(f.sigma, pen)) @ f.V.T
    gp = (fp.U * psi_prime(fp.sigma, pen)) @ fp.V.T
    return float(prob.rho * np.linalg.norm(X_prev - X) + lam * pen.beta * np.linalg.norm(g - gp))


def solve_mc(
    prob: McProblem,
    X0=None,
    tol: float = 1e-8,
    maxit: int = 2000,
    continuation: bool = True,
    schedule: LambdaSchedule | None = None,
    cg_tol: float = 1e-10,
) -> McSolution:
    """Alternate W- and X-steps until ``||X_s - X_{s-1}||_F / ||X_{s-1}||_F < tol``.

    ``X0`` defaults to the zero-filled observations ``A*(b)``. The tolerance
    test is armed only once the schedule has reached ``prob.lam``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    sched = schedule if schedule is not None else mc_schedule(prob, continuation)
    X = prob.op.adjoint(prob.b) if X0 is None else np.array(X0, dtype=float)
    if X.shape != prob.shape:
        raise ValueError(f"X0 must have shape {prob.shape}")
    W = X.copy()
    fx = svd(X)
    nuc_w = float(np.sum(fx.sigma))
    trace = SolverTrace()
    lam_prev = e_prev = None

    for s in range(1, maxit + 1):
        lam = sched.value(s)
        if lam == lam_prev:
            e_start = e_prev
        else:
            e_start = _energy(X, W, nuc_w, _psi_sum(fx.sigma, prob.penalty), prob, lam)

        shrunk = np.maximum(fx.sigma - prob.threshold(lam), 0.0)
        W_new = (fx.U * shrunk) @ fx.V.T
        nuc_new = float(np.sum(shrunk))

        upd = _x_update(X, fx, W_new, nuc_new, prob, lam, cg_tol)
        step = float(np.linalg.norm(upd.step))
        nx = float(np.linalg.norm(X))
        rel = step / nx if nx > 0 else step
        trace.record(
            lam=lam,
            energy=upd.energy,
            energy_start=e_start,
            x_rel_change=rel,
            x_step=step,
            w_step=float(np.linalg.norm(W_new - W)),
            residual=criticality_residual_mc(upd.X, X, prob, lam, upd.factors, fx),
            cg_iterations=upd.cg_iterations,
            cg_converged=upd.cg_converged,
            backtracks=upd.backtracks,
        )
        X, fx, W, nuc_w = upd.X, upd.factors, W_new, nuc_new
        e_prev, lam_prev = upd.energy, lam
        if rel < tol and sched.at_target(s):
            trace.termination = "tolerance"
            break
    else:
        trace.termination = "maxit"
    return McSolution(X, W, trace)


def sampler_problem(shape, indices, b, penalty: PenaltyParams | None = None, rho: float = 1.0, lam: float | None = None) -> McProblem:
    """Convenience constructor for completion problems with the default weight."""
    op = EntrySampler(shape, indices)
    if lam is None:
        lam = default_lambda_mc(op, b, rho)
    return McProblem(op, b, lam, rho, penalty)
