"""Generalized alternating projection with a plug-in denoiser, plain or saturation-aware."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DenoiserError, DimensionError, ParameterError, ValidationError
from ..model import adjoint, forward, gram_diagonal

MODES = ("plain_gap", "sapnet")


def default_schedule(start: float = 0.1, ratio: float = 0.5, stages: int = 3) -> list[float]:
    return [start * ratio**k for k in range(stages)]


@dataclass
class SolverConfig:
    mode: str = "sapnet"
    T: float | None = None
    mu: float = 1.0
    max_iters: int = 100
    strength_schedule: list[float] = field(default_factory=default_schedule)
    tol: float | None = None
    sat_tol: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.mu > 0:
            raise ParameterError("step size mu must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be a positive integer")
        if not self.strength_schedule:
            raise ParameterError("strength schedule is empty")
        if self.mode == "sapnet" and (self.T is None or not self.T > 0):
            raise ParameterError("sapnet mode needs a positive threshold T")
        if self.sat_tol < 0:
            raise ParameterError("sat_tol must be nonnegative")

    def strength(self, t: int) -> float:
        k = len(self.strength_schedule)
        return self.strength_schedule[min(t * k // self.max_iters, k - 1)]


@dataclass
class ReconResult:
    x: np.ndarray
    fidelity: list[float]
    iterations: int


def gap_step(x_t, residual, m, mu: float = 1.0, gram=None):
    """``x + mu * H^T (H H^T)^{-1} residual``; unsensed pixels get no correction."""
    g = gram_diagonal(m) if gram is None else gram
    q = np.divide(residual, g, out=np.zeros_like(g), where=g > 0)
    return x_t + mu * adjoint(q, m)


def saturated_mask(y_T, T: float, sat_tol: float = 0.0) -> np.ndarray:
    y_T = np.asarray(y_T, dtype=np.float64)
    if np.any(y_T > T):
        raise ValidationError("clipped measurement exceeds the threshold T")
    return y_T >= T - sat_tol


def sapnet_residual(y_T, r_t, T: float, sat_tol: float = 0.0):
    """Plain residual on unsaturated pixels, ``(T - r)^+`` on saturated ones."""
    sat = saturated_mask(y_T, T, sat_tol)
    return np.where(sat, np.maximum(T - r_t, 0.0), y_T - r_t)


def reconstruct(y_T, m, cfg: SolverConfig, denoiser, callback=None) -> ReconResult:
    """Run GAP from ``x = 0`` for ``cfg.max_iters`` iterations.

    ``callback(t, x)`` is invoked with every new iterate.
    """
    y_T = np.asarray(y_T, dtype=np.float64)
    bits = m.bits if hasattr(m, "bits") else np.asarray(m)
    n1, n2, B = bits.shape
    if y_T.shape != (n1 * n2,):
        raise DimensionError(f"measurement length {y_T.shape} does not match n = {n1 * n2}")
    sat = None
    if cfg.mode == "sapnet":
        sat = saturated_mask(y_T, cfg.T, cfg.sat_tol)
    gram = gram_diagonal(bits)
    x = np.zeros((n1, n2, B))
    fidelity = []
    t = 0
    for t in range(cfg.max_iters):
        r = forward(x, bits)
        if sat is None:
            e = y_T - r
        else:
            e = np.where(sat, np.maximum(cfg.T - r, 0.0), y_T - r)
        fidelity.append(float(np.linalg.norm(e)))
        s = gap_step(x, e, bits, cfg.mu, gram)
        x_new = denoiser(s, cfg.strength(t))
        if getattr(x_new, "shape", None) != s.shape:
            raise DenoiserError(f"denoiser returned shape {getattr(x_new, 'shape', None)}, expected {s.shape}")
        x_new = np.asarray(x_new, dtype=np.float64)
        if callback is not None:
            callback(t, x_new)
        done = False
        if cfg.tol is not None:
            change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-300)
            done = change < cfg.tol
        x = x_new
        if done:
            break
    return ReconResult(x=x, fidelity=fidelity, iterations=t + 1)
