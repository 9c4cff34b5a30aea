"""Saturation fraction, recovery bound and bound-optimal mask density.

``p_s`` curves passed to :func:`normalized_bound_g` and :func:`optimal_density`
are callables ``curve(p, T)`` that accept numpy arrays of densities.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import ParameterError
from .masks import fine_density_grid

# keeps p_s draws on a different Philox key range than mask frames
_PS_STREAM = 1 << 40
_HOEFFDING_CONF = 0.01


@dataclass(frozen=True)
class BoundParams:
    p: float
    T: float
    B: int
    rho: float
    delta: float
    r: float
    n: int
    eps1: float = 0.01
    eps2: float = 0.01
    eps_z: float = 0.0
    p_s: float = 0.0

    def __post_init__(self):
        checks = [
            (0 < self.p < 1, "p must lie in (0, 1)"),
            (self.T > 0, "T must be positive"),
            (self.B >= 1, "B must be a positive integer"),
            (self.rho > 0, "rho must be positive"),
            (self.delta >= 0, "delta must be nonnegative"),
            (self.r > 0, "r must be positive"),
            (self.n >= 1, "n must be a positive integer"),
            (self.eps1 > 0, "eps1 must be positive"),
            (self.eps2 > 0, "eps2 must be positive"),
            (self.eps_z >= 0, "eps_z must be nonnegative"),
            (0 <= self.p_s <= 1, "p_s must lie in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)


@dataclass(frozen=True)
class BoundResult:
    beta_T: float
    rhs: float
    success_prob_lower: float

    def as_dict(self) -> dict:
        return asdict(self)


def beta_T(T, B, rho):
    """Saturation severity ``(B*rho/2 - T)^+``."""
    return np.maximum(B * rho / 2 - np.asarray(T, dtype=np.float64), 0.0)


def delta_T(T, B, rho):
    """Normalized saturation weight ``(B/2 - T/rho)^+ * ((B/2 - T/rho)^+ + 4B)``."""
    t = np.maximum(B / 2 - np.asarray(T, dtype=np.float64) / rho, 0.0)
    return t * (t + 4 * B)


def success_probability(B: int, r: float, n: int, eps1: float, eps2: float) -> float:
    log_union = (B * r + 1) * math.log(2) - n * eps1**2 / (2 * B**2)
    union = math.exp(log_union) if log_union < 700 else math.inf
    return 1.0 - union - math.exp(-2 * n * eps2**2)


def theorem_bound(params: BoundParams) -> BoundResult:
    """Bound on ``||x - x_hat|| / sqrt(nB)`` for the saturated CSP estimate."""
    P = params
    p, B = P.p, P.B
    beta = float(beta_T(P.T, B, P.rho))
    noise = 2 * math.sqrt((1 - P.p_s) / (P.n * B * p)) * P.eps_z
    inner = ((1 + B * p / (1 - p)) * P.delta
             + P.rho**2 * P.eps1 / (p * (1 - p))
             + (P.p_s + P.eps2) * beta * (beta / B + 4 * P.rho))
    return BoundResult(
        beta_T=beta,
        rhs=noise + math.sqrt(inner),
        success_prob_lower=success_probability(B, P.r, P.n, P.eps1, P.eps2),
    )


def estimate_ps(x, T: float, p: float, trials: int, seed: int = 0,
                chunk_elems: int = 1 << 22) -> tuple[float, float]:
    """Monte-Carlo estimate of the expected saturated fraction ``E|I_s| / n``.

    Returns ``(estimate, half_width)`` where ``half_width`` is the 99% Hoeffding
    radius over all ``trials * n`` indicator draws. Uniforms come from one Philox
    stream, so calls with the same seed but different ``p`` share random numbers
    and the estimate is exactly monotone in ``p``.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    x = np.asarray(x, dtype=np.float64)
    n1, n2, B = x.shape
    n = n1 * n2
    X = x.reshape(n, B, order="F")
    rng = np.random.Generator(np.random.Philox(key=int(seed) + (_PS_STREAM << 64)))
    per_chunk = max(1, chunk_elems // (n * B))
    count = 0
    done = 0
    while done < trials:
        k = min(per_chunk, trials - done)
        bits = rng.random((k, n, B)) < p
        y = np.einsum("tnb,nb->tn", bits, X)
        count += int(np.count_nonzero(y >= T))
        done += k
    half_width = math.sqrt(math.log(2 / _HOEFFDING_CONF) / (2 * trials * n))
    return count / (trials * n), half_width


def exact_ps(x, T: float, p: float, max_frames: int = 16) -> float:
    """Exact ``E|I_s| / n`` by enumerating all ``2**B`` mask patterns per pixel."""
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    x = np.asarray(x, dtype=np.float64)
    n1, n2, B = x.shape
    if B > max_frames:
        raise ParameterError(f"exact enumeration limited to {max_frames} frames, got {B}")
    patterns = (np.arange(1 << B)[:, None] >> np.arange(B)[None, :]) & 1
    ones = patterns.sum(axis=1)
    weight = p**ones * (1 - p) ** (B - ones)
    y = x.reshape(n1 * n2, B, order="F") @ patterns.T      # (n, 2**B)
    return float(((y >= T) @ weight).sum() / (n1 * n2))


def monte_carlo_curve(x, trials: int = 200, seed: int = 0):
    """``p_s`` curve backed by :func:`estimate_ps` with common random numbers."""
    def curve(p, T):
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        return np.array([estimate_ps(x, T, float(pi), trials, seed)[0] for pi in p])
    return curve


def power_curve(k: float = 2.0):
    """Threshold-independent surrogate ``p_s = p**k``."""
    return lambda p, T: np.asarray(p, dtype=np.float64) ** k


def uniform_scene_curve(level: float, B: int):
    """Exact ``p_s`` for a cube whose entries all equal ``level``.

    A pixel saturates when the number of open bits ``K ~ Bin(B, p)`` satisfies
    ``K * level >= T``.
    """
    def curve(p, T):
        p = np.asarray(p, dtype=np.float64)
        if level <= 0:
            return np.zeros_like(p)
        k_min = math.ceil(T / level - 1e-12)
        if k_min > B:
            return np.zeros_like(p)
        return stats.binom.sf(k_min - 1, B, p)
    return curve


def normalized_bound_g(p, T: float, B: int, rho: float, delta: float,
                       eps1: float, eps2: float, p_s_curve):
    """Squared bound divided by ``rho**2`` for the noiseless case."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise ParameterError("p must lie in (0, 1)")
    if not T > 0:
        raise ParameterError("T must be positive")
    dp = delta / rho**2
    ps = np.asarray(p_s_curve(p_arr, T), dtype=np.float64)
    g = ((1 + B * p_arr / (1 - p_arr)) * dp
         + eps1 / (p_arr * (1 - p_arr))
         + (ps + eps2) * delta_T(T, B, rho) / B)
    return float(g) if g.ndim == 0 else g


def optimal_density(T_grid, B: int, rho: float, delta: float, eps1: float,
                    eps2: float, p_s_curve, p_grid=None) -> list[tuple[float, float]]:
    """Grid minimizer of :func:`normalized_bound_g` for each threshold.

    Ties resolve to the smallest density on the grid.
    """
    T_grid = [float(t) for t in T_grid]
    p_grid = np.asarray(fine_density_grid() if p_grid is None else p_grid, dtype=np.float64)
    if not T_grid or p_grid.size == 0:
        raise ParameterError("threshold and density grids must be nonempty")
    if np.any(np.diff(p_grid) <= 0):
        raise ParameterError("density grid must be strictly increasing")
    out = []
    for T in T_grid:
        g = np.atleast_1d(normalized_bound_g(p_grid, T, B, rho, delta, eps1, eps2, p_s_curve))
        out.append((T, float(p_grid[int(np.argmin(g))])))
    return out
