"""SCI forward model with element-wise clipping.

Cubes are float64 arrays shaped ``(n1, n2, B)``. Snapshot vectors have length
``n = n1 * n2`` and use column-major order within a frame; a vectorized cube
concatenates its frames in that order, which is exactly
``cube.reshape(-1, order="F")``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, ValidationError


@dataclass(frozen=True)
class ModelParams:
    rho: float = 2.0
    B: int = 8

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError(f"rho must be positive, got {self.rho}")
        if self.B < 1:
            raise ParameterError(f"B must be a positive integer, got {self.B}")

    @property
    def cap(self) -> float:
        """Largest possible ideal measurement ``B * rho / 2``."""
        return self.B * self.rho / 2


@dataclass
class MaskSet:
    """Binary coded masks, one per frame, stored as a uint8 ``(n1, n2, B)`` array."""

    bits: np.ndarray
    p: float = float("nan")
    seed: int = 0
    generator: str = ""

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 3:
            raise DimensionError(f"mask bits must be 3-D (n1, n2, B), got shape {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValidationError("mask entries must be 0 or 1")
        self.bits = bits.astype(np.uint8, copy=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.bits.shape

    @property
    def n(self) -> int:
        return self.bits.shape[0] * self.bits.shape[1]

    @property
    def B(self) -> int:
        return self.bits.shape[2]


@dataclass
class Measurement:
    y: np.ndarray
    y_T: np.ndarray
    T: float
    sat_index: np.ndarray
    noise_eps: float = 0.0
    meta: dict = field(default_factory=dict)


def _bits(m) -> np.ndarray:
    return m.bits if isinstance(m, MaskSet) else np.asarray(m)


def validate_cube(x, rho: float | None = None) -> np.ndarray:
    """Return ``x`` as a float64 cube, checking finiteness, sign and the class bound."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"cube must be 3-D (n1, n2, B), got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValidationError("cube contains non-finite entries")
    if (x < 0).any():
        raise ValidationError("cube contains negative intensities")
    if rho is not None and x.max(initial=0.0) > rho / 2:
        raise ValidationError(f"cube exceeds the class bound rho/2 = {rho / 2}")
    return x


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, shape) -> np.ndarray:
    return np.asarray(v).reshape(shape, order="F")


def forward(x, m) -> np.ndarray:
    """Snapshot ``y[j] = sum_b C_b[j] * x_b[j]`` as a length-n vector."""
    bits = _bits(m)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != bits.shape:
        raise DimensionError(f"cube shape {x.shape} does not match mask shape {bits.shape}")
    return vec((bits * x).sum(axis=2))


def adjoint(r, m) -> np.ndarray:
    bits = _bits(m)
    r = np.asarray(r, dtype=np.float64)
    n1, n2, _ = bits.shape
    if r.shape != (n1 * n2,):
        raise DimensionError(f"residual length {r.shape} does not match n = {n1 * n2}")
    return bits * unvec(r, (n1, n2))[:, :, None]


def gram_diagonal(m) -> np.ndarray:
    """Diagonal of ``H H^T``: number of open mask entries per pixel."""
    return vec(_bits(m).sum(axis=2, dtype=np.float64))


def clip(y, T: float) -> np.ndarray:
    if not T > 0:
        raise ParameterError(f"clipping threshold must be positive, got {T}")
    return np.minimum(np.asarray(y, dtype=np.float64), T)


def saturated_indices(y, T: float) -> np.ndarray:
    """Indices ``j`` with ``y[j] >= T`` (the boundary counts as saturated)."""
    if not T > 0:
        raise ParameterError(f"clipping threshold must be positive, got {T}")
    return np.flatnonzero(np.asarray(y) >= T)


def measure(x, m, T: float, noise_sigma: float = 0.0, rng=None) -> Measurement:
    """Simulate ``y_T = clip(Hx + z; T)``.

    Noise entries on saturated locations are zeroed in the recorded ``z`` so
    that ``noise_eps`` is the norm of the noise that actually reaches ``y_T``.
    """
    y0 = forward(x, m)
    if noise_sigma > 0:
        rng = np.random.default_rng() if rng is None else rng
        z = noise_sigma * rng.standard_normal(y0.shape)
    else:
        z = np.zeros_like(y0)
    y = y0 + z
    sat = saturated_indices(y, T)
    z[sat] = 0.0
    return Measurement(y=y, y_T=clip(y, T), T=float(T), sat_index=sat,
                       noise_eps=float(np.linalg.norm(z)))
