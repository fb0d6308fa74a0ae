"""SVD contract, soft-thresholding, conjugate gradients and measurement maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "SvdFactors",
    "svd",
    "soft_threshold_singular",
    "soft_threshold_vec",
    "CgResult",
    "cg_solve",
    "MeasurementOp",
    "DenseMatrix",
    "EntrySampler",
]


class SvdFactors(NamedTuple):
    """Thin SVD ``X = U diag(sigma) V^T`` with ``m = min(n1, n2)`` columns."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def svd(X) -> SvdFactors:
    """Thin SVD with a deterministic sign convention.

    Each pair of singular vectors is flipped so that the largest-magnitude
    entry of the left vector is positive.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("svd input contains non-finite entries")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if U.size:
        idx = np.argmax(np.abs(U), axis=0)
        signs = np.sign(U[idx, np.arange(U.shape[1])])
        signs[signs == 0] = 1.0
        U = U * signs
        Vt = Vt * signs[:, None]
    return SvdFactors(U, s, Vt.T)


def soft_threshold_vec(x, tau: float):
    """Componentwise shrinkage ``sign(x) max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def soft_threshold_singular(X, tau: float, factors: SvdFactors | None = None):
    """Singular value thresholding ``U diag((sigma - tau)_+) V^T``.

    This is the proximal map of ``tau * ||.||_*``.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if factors is None:
        factors = svd(X)
    U, s, V = factors
    return (U * np.maximum(s - tau, 0.0)) @ V.T


class CgResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    residual: float


def cg_solve(op: Callable, rhs, tol: float = 1e-10, maxit: int | None = None, x0=None) -> CgResult:
    """Conjugate gradients for a symmetric positive-definite map.

    ``op`` may act on arrays of any shape; inner products are taken over all
    entries. Iteration stops once ``||op(z) - rhs|| <= tol * ||rhs||``. Running
    out of iterations is reported through ``converged``, never raised.

    Parameters
    ----------
    op : callable
        Matrix-free application of the operator.
    rhs : ndarray
    tol : float
        Relative residual tolerance.
    maxit : int, optional
        Defaults to ``10 * rhs.size``.
    x0 : ndarray, optional
        Starting point, zero by default.
    """
    b = np.asarray(rhs, dtype=float)
    if maxit is None:
        maxit = 10 * max(b.size, 1)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return CgResult(np.zeros_like(b), 0, True, 0.0)
    r = b - op(x) if x0 is not None else b.copy()
    rr = np.vdot(r, r)
    target = (tol * bnorm) ** 2
    if rr <= target:
        return CgResult(x, 0, True, float(np.sqrt(rr)))
    d = r.copy()
    it = 0
    while it < maxit:
        it += 1
        q = op(d)
        dq = np.vdot(d, q)
        if dq <= 0:
            # operator not positive definite along d; give up cleanly
            break
        step = rr / dq
        x += step * d
        r -= step * q
        rr_new = np.vdot(r, r)
        if rr_new <= target:
            rr = rr_new
            return CgResult(x, it, True, float(np.sqrt(rr)))
        d = r + (rr_new / rr) * d
        rr = rr_new
    return CgResult(x, it, False, float(np.sqrt(rr)))


class MeasurementOp:
    """Linear map from a vector or matrix domain to an observation vector.

    Subclasses implement ``apply`` and ``adjoint``; ``domain_shape`` and
    ``n_obs`` describe the two sides.
    """

    domain_shape: tuple
    n_obs: int

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y) -> np.ndarray:
        raise NotImplementedError

    def normal(self, x) -> np.ndarray:
        """``adjoint(apply(x))``."""
        return self.adjoint(self.apply(x))

    def norm_sq(self) -> float:
        """Squared operator norm ``||A||_2^2``."""
        raise NotImplementedError

    def gram_shifted(self, rho: float) -> Callable:
        """Matrix-free ``x -> A*A x + rho x``."""
        return lambda x: self.normal(x) + rho * x


@dataclass
class DenseMatrix(MeasurementOp):
    """Explicit matrix ``A`` of shape ``(n_obs, prod(domain_shape))``.

    For a matrix domain the unknown is vectorized in row-major order.
    """

    A: np.ndarray
    domain_shape: tuple = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("A must be 2-D")
        if self.domain_shape is None:
            self.domain_shape = (self.A.shape[1],)
        self.domain_shape = tuple(self.domain_shape)
        if int(np.prod(self.domain_shape)) != self.A.shape[1]:
            raise ValueError(f"domain shape {self.domain_shape} does not match A with {self.A.shape[1]} columns")
        self.n_obs = self.A.shape[0]
        self._norm_sq = None

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.domain_shape:
            raise ValueError(f"expected input of shape {self.domain_shape}, got {x.shape}")
        return self.A @ x.reshape(-1)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_obs,):
            raise ValueError(f"expected observation of length {self.n_obs}, got shape {y.shape}")
        return (self.A.T @ y).reshape(self.domain_shape)

    def norm_sq(self):
        if self._norm_sq is None:
            self._norm_sq = float(np.linalg.norm(self.A, 2) ** 2) if self.A.size else 0.0
        return self._norm_sq


class EntrySampler(MeasurementOp):
    """Componentwise projection onto an index set ``Omega``.

    Parameters
    ----------
    shape : tuple of int
        ``(n1, n2)`` of the unknown matrix.
    indices : array_like
        Either flat row-major indices, or a pair ``(rows, cols)``.
    """

    def __init__(self, shape, indices):
        self.domain_shape = tuple(int(v) for v in shape)
        size = int(np.prod(self.domain_shape))
        if isinstance(indices, tuple) and len(indices) == 2:
            flat = np.ravel_multi_index((np.asarray(indices[0]), np.asarray(indices[1])), self.domain_shape)
        else:
            flat = np.asarray(indices, dtype=np.int64).reshape(-1)
        if flat.size and (flat.min() < 0 or flat.max() >= size):
            raise ValueError("sampling index out of range")
        if np.unique(flat).size != flat.size:
            raise ValueError("sampling indices must be unique")
        self.indices = flat
        self.n_obs = int(flat.size)
        mask = np.zeros(size, dtype=bool)
        mask[flat] = True
        self.mask = mask.reshape(self.domain_shape)

    @property
    def sampling_ratio(self) -> float:
        return self.n_obs / self.mask.size

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != self.domain_shape:
            raise ValueError(f"expected input of shape {self.domain_shape}, got {X.shape}")
        return X.reshape(-1)[self.indices]

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_obs,):
            raise ValueError(f"expected observation of length {self.n_obs}, got shape {y.shape}")
        out = np.zeros(self.mask.size)
        out[self.indices] = y
        return out.reshape(self.domain_shape)

    def normal(self, X):
        return np.where(self.mask, X, 0.0)

    def norm_sq(self):
        return 1.0 if self.n_obs else 0.0
