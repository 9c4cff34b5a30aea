"""Seeded i.i.d. Bernoulli mask generation.

Each frame draws from its own Philox4x64-10 stream keyed by ``(seed, frame)``,
so a mask set is a pure function of ``(n1, n2, B, p, seed)`` on any platform.
A bit is open when a 53-bit uniform double falls below ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import MaskSet, unvec

GENERATOR_NAME = "philox4x64-10/numpy-random-53bit"

_U64 = 1 << 64


@dataclass(frozen=True)
class MaskSpec:
    n1: int
    n2: int
    B: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ParameterError(f"mask density p must lie in (0, 1), got {self.p}")
        if min(self.n1, self.n2, self.B) < 1:
            raise ParameterError("mask dimensions must be positive")
        if not 0 <= self.seed < _U64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


def frame_stream(seed: int, frame: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(frame) << 64)))


def sample_masks(spec: MaskSpec) -> MaskSet:
    n = spec.n1 * spec.n2
    bits = np.empty((spec.n1, spec.n2, spec.B), dtype=np.uint8)
    for b in range(spec.B):
        u = frame_stream(spec.seed, b).random(n)
        bits[:, :, b] = unvec(u < spec.p, (spec.n1, spec.n2))
    return MaskSet(bits=bits, p=spec.p, seed=spec.seed, generator=GENERATOR_NAME)


def check_density_grid(values) -> list[float]:
    values = [float(v) for v in values]
    if not values:
        raise ParameterError("density grid is empty")
    if any(not 0 < v < 1 for v in values):
        raise ParameterError("densities must lie in (0, 1)")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError("density grid must be strictly increasing")
    return values


def default_density_grid() -> list[float]:
    return [k / 10 for k in range(1, 10)]


def fine_density_grid(step: float = 0.005) -> list[float]:
    k = int(round(1 / step))
    return [i / k for i in range(1, k)]
