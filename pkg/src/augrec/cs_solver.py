"""Alternating minimization for the augmented sparse-recovery model.

The model ``1/2 ||Ax - y||^2 + lam (||x||_1 + beta Phi(x))`` is relaxed with an
auxiliary variable ``w`` into the energy::

    J(x, w) = 1/2 ||Ax - y||^2 + lam (1 + alpha beta) ||w||_1
              + lam beta sum(psi(x)) + rho/2 ||x - w||^2

and minimized blockwise: ``w`` exactly by soft-thresholding, ``x`` by one
quasi-Newton step ``(A^T A + rho I) dx = -grad_x J``. Because ``psi`` is concave
that step minimizes a quadratic majorizer of ``J``, so the energy never
increases. With ``beta = 0`` the scheme is a Lasso solver.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import DenseMatrix, cg_solve, soft_threshold_vec
from .penalty import PenaltyParams, grad_psi_vec, psi
from .trace import LambdaSchedule, SolverDivergence, SolverTrace

__all__ = [
    "CsProblem",
    "CsSolution",
    "energy_cs",
    "solve_cs",
    "criticality_residual_cs",
    "stationarity_residual_cs",
    "default_lambda_cs",
    "cs_schedule",
    "solve_cs_discrepancy",
]

log = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10
MAX_BACKTRACKS = 10


@dataclass
class CsProblem:
    """Sparse recovery instance.

    ``A`` may be an array or a :class:`DenseMatrix`; ``lam`` is the final
    regularization weight (continuation, when used, ends there).
    """

    A: DenseMatrix
    y: np.ndarray
    lam: float
    rho: float = 1.0
    penalty: PenaltyParams = None

    def __post_init__(self):
        if not isinstance(self.A, DenseMatrix):
            self.A = DenseMatrix(self.A)
        if self.penalty is None:
            self.penalty = PenaltyParams()
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.y.shape != (self.A.n_obs,):
            raise ValueError(f"y has length {self.y.size}, expected {self.A.n_obs}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        n, p = self.A.A.shape
        if n > p:
            warnings.warn(f"more measurements than unknowns (n={n} > p={p})", stacklevel=2)

    @property
    def p(self) -> int:
        return self.A.domain_shape[0]

    @property
    def tau(self) -> float:
        return self.threshold(self.lam)

    def threshold(self, lam: float) -> float:
        return lam * (1.0 + self.penalty.alpha * self.penalty.beta) / self.rho


class CsSolution(NamedTuple):
    x: np.ndarray
    w: np.ndarray
    trace: SolverTrace


def _coupling(op, rho):
    return rho / (rho + op.norm_sq())


def default_lambda_cs(A, y, rho: float = 1.0, scale: float = 1e-3) -> float:
    """``scale * ||A^T y||_inf`` corrected for the auxiliary-variable coupling.

    Eliminating ``x`` from the energy leaves a Lasso in ``w`` whose data term
    is weighted by ``(I + A A^T / rho)^{-1}``; the factor ``rho / (rho + ||A||^2)``
    keeps the effective weight near ``scale * ||A^T y||_inf``.
    """
    op = A if isinstance(A, DenseMatrix) else DenseMatrix(A)
    lam = scale * float(np.max(np.abs(op.adjoint(y)), initial=0.0)) * _coupling(op, rho)
    # any positive weight yields the zero solution when A^T y = 0
    return lam if lam > 0 else scale * _coupling(op, rho)


def cs_schedule(prob: CsProblem, continuation: bool = True) -> LambdaSchedule:
    """Halve lam every 20 iterations, starting from half the effective lam_max."""
    if not continuation:
        return LambdaSchedule.constant(prob.lam)
    lam_max = float(np.max(np.abs(prob.A.adjoint(prob.y)), initial=0.0)) * _coupling(prob.A, prob.rho)
    return LambdaSchedule(max(0.5 * lam_max, prob.lam), prob.lam, factor=0.5, every=20)


def energy_cs(x, w, prob: CsProblem, lam: float | None = None) -> float:
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (prob.p,) or w.shape != (prob.p,):
        raise ValueError(f"x and w must have shape ({prob.p},), got {x.shape} and {w.shape}")
    lam = prob.lam if lam is None else lam
    a, b = prob.penalty.alpha, prob.penalty.beta
    r = prob.A.apply(x) - prob.y
    d = x - w
    return float(
        0.5 * (r @ r)
        + lam * (1.0 + a * b) * np.sum(np.abs(w))
        + lam * b * np.sum(psi(x, prob.penalty))
        + 0.5 * prob.rho * (d @ d)
    )


def criticality_residual_cs(x, w, x_prev, prob: CsProblem, lam: float | None = None) -> float:
    """``rho ||x_prev - x|| + lam beta ||psi'(x) - psi'(x_prev)||``.

    Bounds the distance of zero to the subdifferential of the energy at the
    new iterate; ``w`` is accepted for signature symmetry only.
    """
    lam = prob.lam if lam is None else lam
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    gdiff = grad_psi_vec(x, prob.penalty) - grad_psi_vec(x_prev, prob.penalty)
    return float(prob.rho * np.linalg.norm(x_prev - x) + lam * prob.penalty.beta * np.linalg.norm(gdiff))


def stationarity_residual_cs(x, w, prob: CsProblem, lam: float | None = None) -> float:
    """Sup-norm distance of ``A^T(y - Ax) - lam beta psi'(x)`` to ``lam (1+alpha beta) d||w||_1``.

    Zero at fixed points of the iteration. With ``beta = 0`` this is the Lasso
    subgradient residual of the pair ``(x, w)``.
    """
    lam = prob.lam if lam is None else lam
    a, b = prob.penalty.alpha, prob.penalty.beta
    g = prob.A.adjoint(prob.y - prob.A.apply(x)) - lam * b * grad_psi_vec(x, prob.penalty)
    t = lam * (1.0 + a * b)
    w = np.asarray(w, dtype=float)
    on = w != 0
    dist = np.where(on, np.abs(g - t * np.sign(w)), np.maximum(np.abs(g) - t, 0.0))
    return float(np.max(dist, initial=0.0))


def solve_cs(
    prob: CsProblem,
    x0=None,
    tol: float = 1e-4,
    maxit: int = 500,
    continuation: bool = True,
    schedule: LambdaSchedule | None = None,
    cg_tol: float = 1e-10,
) -> CsSolution:
    """Run the alternating scheme until the relative change of ``x`` drops below ``tol``.

    The tolerance test is only armed once the continuation schedule has
    reached ``prob.lam``.

    Parameters
    ----------
    prob : CsProblem
    x0 : ndarray, optional
        Initial point; zero by default.
    tol, maxit
        Stopping rule ``||x_s - x_{s-1}|| / ||x_{s-1}|| < tol`` or ``s = maxit``.
    continuation : bool
        Use :func:`cs_schedule`; ignored when ``schedule`` is given.
    schedule : LambdaSchedule, optional
    cg_tol : float
        Relative residual tolerance of the inner CG solve.

    Returns
    -------
    CsSolution
        ``(x, w, trace)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    sched = schedule if schedule is not None else cs_schedule(prob, continuation)
    pen = prob.penalty
    a, b, rho = pen.alpha, pen.beta, prob.rho
    op = prob.A
    hess = op.gram_shifted(rho)
    x = np.zeros(prob.p) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    if x.shape != (prob.p,):
        raise ValueError(f"x0 must have length {prob.p}")
    w = x.copy()
    trace = SolverTrace()
    lam_prev = None
    e_prev = None

    for s in range(1, maxit + 1):
        lam = sched.value(s)
        e_start = e_prev if lam == lam_prev else energy_cs(x, w, prob, lam)

        w_new = soft_threshold_vec(x, lam * (1.0 + a * b) / rho)
        e_w = energy_cs(x, w_new, prob, lam)

        grad = op.adjoint(op.apply(x) - prob.y) + lam * b * grad_psi_vec(x, pen) + rho * (x - w_new)
        cg = cg_solve(hess, -grad, tol=cg_tol)
        if not cg.converged:
            log.debug("cg did not converge at iteration %d (residual %.3e)", s, cg.residual)
        dx = cg.x
        x_new = x + dx
        e_new = energy_cs(x_new, w_new, prob, lam)
        bt = 0
        while e_new > e_w + ENERGY_SLACK and bt < MAX_BACKTRACKS:
            bt += 1
            dx = 0.5 * dx
            x_new = x + dx
            e_new = energy_cs(x_new, w_new, prob, lam)
        if bt:
            log.info("iteration %d: %d step halvings", s, bt)
        if e_new > e_w + ENERGY_SLACK:
            log.warning("iteration %d: no descent after %d halvings; step rejected", s, bt)
            dx = np.zeros_like(x)
            x_new, e_new = x, e_w
        if not np.isfinite(e_new):
            raise SolverDivergence(f"energy became {e_new} at iteration {s} (lam={lam:.3e})")

        step = float(np.linalg.norm(dx))
        nx = float(np.linalg.norm(x))
        rel = step / nx if nx > 0 else step
        trace.record(
            lam=lam,
            energy=e_new,
            energy_start=e_start,
            x_rel_change=rel,
            x_step=step,
            w_step=float(np.linalg.norm(w_new - w)),
            residual=criticality_residual_cs(x_new, w_new, x, prob, lam),
            cg_iterations=cg.iterations,
            cg_converged=cg.converged,
            backtracks=bt,
        )
        x, w = x_new, w_new
        e_prev, lam_prev = e_new, lam
        if rel < tol and sched.at_target(s):
            trace.termination = "tolerance"
            break
    else:
        trace.termination = "maxit"
    return CsSolution(x, w, trace)


def solve_cs_discrepancy(
    A,
    y,
    noise_norm: float,
    penalty: PenaltyParams | None = None,
    rho: float = 1.0,
    tol: float = 1e-8,
    maxit: int = 3000,
    steps: int = 40,
):
    """Choose ``lam`` so that the sparse block ``w`` fits the data to ``noise_norm``.

    Bisection on ``log(lam)`` for ``||A w* - y|| = noise_norm``; the returned
    ``w`` is then feasible for the constrained problem with
    ``epsilon = noise_norm``. Returns ``(solution, lam)`` for the largest
    bracketed ``lam`` whose residual does not exceed ``noise_norm``.
    """
    op = A if isinstance(A, DenseMatrix) else DenseMatrix(A)
    y = np.asarray(y, dtype=float)
    hi = float(np.max(np.abs(op.adjoint(y)))) * _coupling(op, rho)
    if hi == 0:
        prob = CsProblem(op, y, 1.0, rho, penalty)
        return solve_cs(prob, tol=tol, maxit=maxit, continuation=False), 1.0
    lo = hi * 1e-10
    best = None
    x_warm = None
    log_lo, log_hi = np.log(lo), np.log(hi)
    for _ in range(steps):
        mid = float(np.exp(0.5 * (log_lo + log_hi)))
        prob = CsProblem(op, y, mid, rho, penalty)
        sol = solve_cs(prob, x0=x_warm, tol=tol, maxit=maxit, continuation=False)
        x_warm = sol.x
        if np.linalg.norm(op.apply(sol.w) - y) > noise_norm:
            log_hi = np.log(mid)
        else:
            log_lo = np.log(mid)
            best = (sol, mid)
    if best is None:
        prob = CsProblem(op, y, lo, rho, penalty)
        best = (solve_cs(prob, tol=tol, maxit=maxit, continuation=False), lo)
    return best
