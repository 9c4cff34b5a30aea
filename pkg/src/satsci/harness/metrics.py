from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError


def psnr(x, x_hat, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` in dB; identical cubes give ``inf``."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x - x_hat) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(peak**2 / mse)
