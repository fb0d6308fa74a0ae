"""Seeded synthetic instances for sparse recovery and matrix completion.

All randomness comes from ``numpy.random.Philox`` (Philox4x32-10, a
counter-based generator) keyed directly with the trial seed, so a seed fully
determines an instance.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
import scipy.linalg

from ..linalg import EntrySampler

__all__ = [
    "make_rng",
    "ensemble_covariance",
    "gaussian_ensemble",
    "frame_ensemble",
    "CsInstance",
    "McInstance",
    "gen_cs_instance",
    "gen_mc_instance",
    "degrees_of_freedom",
    "n_measurements",
]

_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x32-10 stream keyed by ``seed`` (reduced mod 2**64)."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def ensemble_covariance(n: int, setting: int, block_size: int = 8) -> np.ndarray:
    """Column covariance: identity (setting 1) or blocks of ``0.2 I + 0.8 11^T`` (setting 2).

    A trailing partial block is used when ``block_size`` does not divide ``n``.
    """
    if setting == 1:
        return np.eye(n)
    if setting != 2:
        raise ValueError(f"unknown setting {setting}")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    blocks = []
    for start in range(0, n, block_size):
        m = min(block_size, n - start)
        blocks.append(0.2 * np.eye(m) + 0.8 * np.ones((m, m)))
    return scipy.linalg.block_diag(*blocks)


def gaussian_ensemble(n: int, p: int, rng, setting: int = 1, block_size: int = 8) -> np.ndarray:
    """``n x p`` matrix whose columns are i.i.d. ``N(0, Sigma)``."""
    G = rng.standard_normal((n, p))
    if setting == 1:
        return G
    L = np.linalg.cholesky(ensemble_covariance(n, setting, block_size))
    return L @ G


def frame_ensemble(n: int, rng) -> np.ndarray:
    """Randomly rotated identity-plus-Hadamard frame of shape ``n x 2n``.

    The columns have unit norm and mutual coherence ``1/sqrt(n)``; the random
    orthogonal rotation and signed column permutation leave the Gram matrix,
    hence every restricted isometry constant, unchanged.
    """
    if n < 1 or n & (n - 1):
        raise ValueError("frame ensemble needs n to be a power of two")
    base = np.hstack([np.eye(n), scipy.linalg.hadamard(n) / math.sqrt(n)])
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    perm = rng.permutation(2 * n)
    signs = rng.choice([-1.0, 1.0], size=2 * n)
    return Q @ base[:, perm] * signs


class CsInstance(NamedTuple):
    A: np.ndarray
    x0: np.ndarray
    y: np.ndarray
    noise: np.ndarray


class McInstance(NamedTuple):
    op: EntrySampler
    X0: np.ndarray
    b: np.ndarray
    noise: np.ndarray

    @property
    def omega(self):
        return self.op.indices


def gen_cs_instance(cfg, seed: int) -> CsInstance:
    """Measurement matrix, k-sparse truth on the first k coordinates, observations.

    Off-support entries of the truth are ``tail * N(0, 1)`` (zero by default).
    Draw order: matrix, support values, tail, noise.
    """
    rng = make_rng(seed)
    n, p, k = cfg.n, cfg.p, cfg.k
    if cfg.ensemble == "frame":
        if p != 2 * n:
            raise ValueError("frame ensemble requires p = 2n")
        A = frame_ensemble(n, rng)
    else:
        A = gaussian_ensemble(n, p, rng, cfg.setting, cfg.block_size)
    x0 = np.zeros(p)
    x0[:k] = rng.standard_normal(k)
    if cfg.tail:
        x0[k:] = cfg.tail * rng.standard_normal(p - k)
    sigma = cfg.noise_sigma
    noise = sigma * rng.standard_normal(n) if sigma else np.zeros(n)
    return CsInstance(A, x0, A @ x0 + noise, noise)


def degrees_of_freedom(n1: int, n2: int, r: int) -> int:
    """``r (n1 + n2 - r)``, the dimension of rank-r matrices."""
    return r * (n1 + n2 - r)


def n_measurements(n1: int, n2: int, r: int, ratio: float | None = None, sr: float | None = None) -> int:
    """Sample count from a ratio to the degrees of freedom (floored) or a sampling ratio (rounded)."""
    if ratio is not None:
        n3 = int(math.floor(ratio * degrees_of_freedom(n1, n2, r) + 1e-9))
    elif sr is not None:
        n3 = int(round(sr * n1 * n2))
    else:
        raise ValueError("need either ratio or sr")
    if not 0 < n3 <= n1 * n2:
        raise ValueError(f"infeasible number of samples n3={n3} for a {n1}x{n2} matrix")
    return n3


def gen_mc_instance(cfg, seed: int) -> McInstance:
    """Rank-r product of Gaussian factors sampled on a uniform index set.

    Draw order: left factor, right factor, index set, noise.
    """
    rng = make_rng(seed)
    n1, n2, r = cfg.n1, cfg.dim2, cfg.r
    XL = rng.standard_normal((n1, r))
    XR = rng.standard_normal((n2, r))
    X0 = XL @ XR.T
    n3 = n_measurements(n1, n2, r, cfg.ratio, cfg.sr)
    omega = np.sort(rng.choice(n1 * n2, size=n3, replace=False))
    op = EntrySampler((n1, n2), omega)
    sigma = cfg.noise_sigma
    noise = sigma * rng.standard_normal(n3) if sigma else np.zeros(n3)
    return McInstance(op, X0, op.apply(X0) + noise, noise)
