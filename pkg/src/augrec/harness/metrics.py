import math

import numpy as np

__all__ = ["rel_err", "rel_err_checked", "psnr"]


def rel_err_checked(estimate, truth):
    """Return ``(value, absolute)``.

    ``value`` is ``||estimate - truth|| / ||truth||`` (l2 for vectors, Frobenius
    for matrices). For a zero truth the absolute error is returned instead and
    ``absolute`` is True.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    err = float(np.linalg.norm(estimate - truth))
    ref = float(np.linalg.norm(truth))
    if ref == 0.0:
        return err, True
    return err / ref, False


def rel_err(estimate, truth) -> float:
    return rel_err_checked(estimate, truth)[0]


def psnr(mse: float) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit images: ``10 log10(255^2 / mse)``."""
    if mse < 0:
        raise ValueError("mse must be nonnegative")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
