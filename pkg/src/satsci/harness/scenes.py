"""Deterministic synthetic video cubes in ``[0, 1]``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ValidationError

KINDS = ("moving_square", "bouncing_blob", "bright_field", "imported")


@dataclass(frozen=True)
class SceneSpec:
    kind: str = "moving_square"
    n1: int = 64
    n2: int = 64
    B: int = 8
    brightness_scale: float = 1.0
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"scene kind must be one of {KINDS}, got {self.kind!r}")
        if min(self.n1, self.n2, self.B) < 1:
            raise ParameterError("scene dimensions must be positive")
        if self.brightness_scale < 0:
            raise ParameterError("brightness_scale must be nonnegative")


def _disk(rr, cc, r0, c0, radius):
    return (rr - r0) ** 2 + (cc - c0) ** 2 <= radius**2


def _moving_square(spec, rng, rr, cc):
    n1, n2 = spec.n1, spec.n2
    side = max(2, min(n1, n2) // 4)
    r0 = rng.integers(0, max(1, n1 - side - spec.B))
    c0 = rng.integers(0, max(1, n2 - side - spec.B))
    dr, dc = rng.choice([-1, 1]), rng.choice([-1, 1])
    if dr < 0:
        r0 += spec.B
    if dc < 0:
        c0 += spec.B
    base = 0.15 + 0.15 * (rr / n1) + 0.1 * ((cc // max(1, n2 // 4)) % 2)
    frames = []
    for b in range(spec.B):
        f = base.copy()
        rs, cs = r0 + dr * b, c0 + dc * b
        f[(rr >= rs) & (rr < rs + side) & (cc >= cs) & (cc < cs + side)] = 1.0
        frames.append(f)
    return np.stack(frames, axis=2)


def _bouncing_blob(spec, rng, rr, cc):
    n1, n2 = spec.n1, spec.n2
    width = max(1.0, min(n1, n2) / 8)
    pos = rng.uniform([width, width], [n1 - width, n2 - width])
    vel = rng.uniform(-2.0, 2.0, size=2)
    frames = []
    for _ in range(spec.B):
        g = np.exp(-((rr - pos[0]) ** 2 + (cc - pos[1]) ** 2) / (2 * width**2))
        frames.append(0.1 + 0.9 * g)
        pos = pos + vel
        for k, lim in enumerate((n1 - 1, n2 - 1)):
            if not 0 <= pos[k] <= lim:
                vel[k] = -vel[k]
                pos[k] = np.clip(pos[k], 0, lim)
    return np.stack(frames, axis=2)


def _bright_field(spec, rng, rr, cc):
    n1, n2 = spec.n1, spec.n2
    m = min(n1, n2)
    centre = rng.uniform([0.35 * n1, 0.35 * n2], [0.65 * n1, 0.65 * n2])
    step = rng.choice([-1, 1], size=2)
    bar_r = int(rng.integers(n1 // 8, max(n1 // 8 + 1, n1 // 4)))
    frames = []
    for b in range(spec.B):
        f = np.full((n1, n2), 0.55)
        f[: n1 // 2, : n2 // 2] = 0.8
        f[bar_r: bar_r + max(1, n1 // 10), :] = 0.25
        r0, c0 = centre + step * b
        f[_disk(rr, cc, r0, c0, 0.3 * m)] = 1.0
        f[_disk(rr, cc, r0, c0, 0.08 * m)] = 0.4
        frames.append(f)
    return np.stack(frames, axis=2)


_BUILDERS = {"moving_square": _moving_square, "bouncing_blob": _bouncing_blob,
             "bright_field": _bright_field}


def generate_scene(spec: SceneSpec) -> np.ndarray:
    """Build the cube for ``spec``; ``imported`` reads a cube file or PGM frames from ``path``."""
    if spec.kind == "imported":
        from .formats import import_frames, read_cube

        if not spec.path:
            raise ValidationError("imported scene needs a path")
        paths = spec.path.split(",")
        if len(paths) == 1 and not paths[0].lower().endswith(".pgm"):
            x = read_cube(paths[0])
        else:
            x = import_frames(paths)
        return np.clip(x * spec.brightness_scale, 0.0, 1.0)
    rng = np.random.default_rng(spec.seed)
    rr, cc = np.meshgrid(np.arange(spec.n1), np.arange(spec.n2), indexing="ij")
    x = _BUILDERS[spec.kind](spec, rng, rr.astype(float), cc.astype(float))
    return np.clip(x * spec.brightness_scale, 0.0, 1.0)
