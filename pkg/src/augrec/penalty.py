"""Rational sparsity penalty and its spectral counterpart.

The scalar penalty is ``phi(t) = alpha|t| / (1 + alpha|t|)``. It is split as
``phi(t) = alpha|t| + psi(t)`` where the remainder ``psi`` is C^2 and concave,
so the nonsmooth part can be handled by soft-thresholding and the smooth part
by gradient steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PenaltyParams",
    "phi",
    "psi",
    "psi_prime",
    "big_phi_vec",
    "big_phi_mat",
    "big_psi_mat",
    "grad_big_psi_mat",
    "grad_psi_vec",
]


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty sharpness ``alpha`` and augmentation weight ``beta``.

    ``validated`` records whether ``beta <= 1 / (20 alpha)``, the sufficient
    condition used by the recovery guarantees. Violating it only warns; the
    solvers run for any ``beta >= 0``.
    """

    alpha: float = 0.5
    beta: float = 0.1
    validated: bool = field(init=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        ok = self.beta <= 1.0 / (20.0 * self.alpha)
        object.__setattr__(self, "validated", bool(ok))
        if not ok:
            warnings.warn(
                f"beta={self.beta} exceeds 1/(20 alpha)={1 / (20 * self.alpha):.4g}; "
                "recovery guarantees do not apply",
                stacklevel=2,
            )

    @property
    def beta_max(self) -> float:
        return 1.0 / (20.0 * self.alpha)


def phi(t, p: PenaltyParams):
    """alpha|t| / (1 + alpha|t|), elementwise."""
    a = p.alpha * np.abs(t)
    return a / (1.0 + a)


def psi(t, p: PenaltyParams):
    # written as -(alpha|t|)^2 / (1 + alpha|t|) to avoid cancellation
    a = p.alpha * np.abs(t)
    return -(a * a) / (1.0 + a)


def psi_prime(t, p: PenaltyParams):
    """Derivative of ``psi``; odd, zero at the origin, nonpositive for t >= 0."""
    t = np.asarray(t, dtype=float)
    a = p.alpha
    u = 1.0 + a * np.abs(t)
    # alpha/u^2 - alpha == -alpha (u^2 - 1) / u^2
    mag = a * (u * u - 1.0) / (u * u)
    return -np.sign(t) * mag


def grad_psi_vec(x, p: PenaltyParams):
    return psi_prime(np.asarray(x, dtype=float), p)


def big_phi_vec(x, p: PenaltyParams) -> float:
    return float(np.sum(phi(np.asarray(x, dtype=float), p)))


def _singular_values(X):
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    return np.linalg.svd(X, compute_uv=False)


def big_phi_mat(X, p: PenaltyParams) -> float:
    """Sum of ``phi`` over the singular values of ``X``."""
    return float(np.sum(phi(_singular_values(X), p)))


def big_psi_mat(X, p: PenaltyParams) -> float:
    """``big_phi_mat(X) - alpha * ||X||_*``."""
    s = _singular_values(X)
    return float(np.sum(phi(s, p)) - p.alpha * np.sum(s))


def grad_big_psi_mat(X, p: PenaltyParams, factors=None):
    """Gradient of the spectral remainder, ``U diag(psi'(sigma)) V^T``.

    Parameters
    ----------
    X : ndarray, shape (n1, n2)
    p : PenaltyParams
    factors : SvdFactors, optional
        Precomputed thin SVD of ``X``; computed when omitted.

    Notes
    -----
    Any valid SVD gives the same result, including for repeated or zero
    singular values, because ``psi'`` is continuous and vanishes at 0.
    """
    if factors is None:
        from .linalg import svd

        factors = svd(X)
    U, s, V = factors.U, factors.sigma, factors.V
    return (U * psi_prime(s, p)) @ V.T
