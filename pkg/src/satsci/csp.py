"""Enumerable compression codes and exhaustive CSP solvers.

A :class:`Codebook` stores codewords as block values over a fixed partition of
the cube, so ``H c`` for every codeword is ``values @ A.T`` with ``A`` the
forward projection of each block indicator. An explicit codebook is the special
case where every cube entry is its own block.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, DimensionError, ParameterError
from .model import _bits, unvec, vec

ENUMERATION_BUDGET = 1 << 20
_CHUNK_ELEMS = 1 << 22


@dataclass
class ClassSpec:
    """Piecewise-constant signal class: block labels plus allowed block values.

    ``values=None`` means each block takes any value in ``[0, rho/2]``.
    """

    labels: np.ndarray
    rho: float = 2.0
    values: list[float] | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 3:
            raise DimensionError("block labels must be a 3-D (n1, n2, B) array")
        ids = np.unique(self.labels)
        if ids[0] != 0 or ids[-1] != ids.size - 1:
            raise ParameterError("block labels must be 0..blocks-1 with no gaps")

    @property
    def blocks(self) -> int:
        return int(self.labels.max()) + 1


def grid_partition(n1: int, n2: int, B: int, splits=(2, 2, 1)) -> np.ndarray:
    """Label array splitting rows, columns and frames into near-equal chunks."""
    sr, sc, sf = splits
    if sr > n1 or sc > n2 or sf > B or min(splits) < 1:
        raise ParameterError(f"cannot split a {n1}x{n2}x{B} cube into {splits}")
    r = np.arange(n1) * sr // n1
    c = np.arange(n2) * sc // n2
    f = np.arange(B) * sf // B
    return (r[:, None, None] * sc + c[None, :, None]) * sf + f[None, None, :]


@dataclass
class Codebook:
    values: np.ndarray          # (K, blocks) block values per codeword
    labels: np.ndarray          # (n1, n2, B) block id of each entry
    rate_r: float
    distortion_delta: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.values.shape[0] == 0:
            raise ParameterError("codebook is empty")
        if self.values.shape[1] != int(self.labels.max()) + 1:
            raise DimensionError("codeword block count does not match labels")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def codeword(self, k: int) -> np.ndarray:
        return self.values[k][self.labels]

    def codewords(self) -> np.ndarray:
        """All codewords vectorized, shape ``(K, nB)``."""
        return self.values[:, vec(self.labels)]

    def block_operator(self, m) -> np.ndarray:
        """``A`` with ``H c = A @ values[k]``; shape ``(n, blocks)``."""
        bits = _bits(m)
        if bits.shape != self.labels.shape:
            raise DimensionError(f"mask shape {bits.shape} does not match codebook {self.labels.shape}")
        n1, n2, B = bits.shape
        n = n1 * n2
        A = np.zeros((n, self.values.shape[1]))
        rows = np.repeat(np.arange(n)[:, None], B, axis=1)
        np.add.at(A, (rows, self.labels.reshape(n, B, order="F")), bits.reshape(n, B, order="F"))
        return A

    def projections(self, m, start: int = 0, stop: int | None = None) -> np.ndarray:
        return self.values[start:stop] @ self.block_operator(m).T

    @classmethod
    def explicit(cls, codewords, rate_r: float | None = None, distortion_delta: float = 0.0):
        """Codebook from full cubes ``(K, n1, n2, B)``."""
        cw = np.asarray(codewords, dtype=np.float64)
        if cw.ndim != 4:
            raise DimensionError("explicit codewords must be shaped (K, n1, n2, B)")
        K, n1, n2, B = cw.shape
        labels = unvec(np.arange(n1 * n2 * B), (n1, n2, B))
        values = cw.reshape(K, -1, order="F")
        if rate_r is None:
            rate_r = max(math.log2(K), 1e-12) / B
        return cls(values=values, labels=labels, rate_r=rate_r, distortion_delta=distortion_delta)


def quantization_levels(levels: int, rho: float) -> np.ndarray:
    if levels < 1:
        raise ParameterError("levels must be a positive integer")
    if levels == 1:
        return np.array([rho / 4])
    return np.linspace(0.0, rho / 2, levels)


def _worst_quantization_error(levels: np.ndarray, rho: float, class_values) -> float:
    if class_values is None:
        # max of a piecewise-quadratic distance over [0, rho/2] sits at an end or a cell midpoint
        cand = np.concatenate([[0.0, rho / 2], (levels[1:] + levels[:-1]) / 2])
    else:
        cand = np.asarray(class_values, dtype=np.float64)
    err = np.min((cand[:, None] - levels[None, :]) ** 2, axis=1)
    return float(err.max())


def build_toy_code(class_spec: ClassSpec, levels: int,
                   budget: int = ENUMERATION_BUDGET) -> Codebook:
    """Uniform scalar quantizer applied block-wise to a piecewise-constant class."""
    blocks = class_spec.blocks
    size = levels ** blocks
    if size > budget:
        raise BudgetError(f"codebook would hold {levels}^{blocks} = {size} codewords (budget {budget})")
    lv = quantization_levels(levels, class_spec.rho)
    values = np.array(list(itertools.product(lv, repeat=blocks)))
    n1, n2, B = class_spec.labels.shape
    worst = _worst_quantization_error(lv, class_spec.rho, class_spec.values)
    block_sizes = np.bincount(vec(class_spec.labels), minlength=blocks)
    delta = float(np.sum(block_sizes * worst) / (n1 * n2 * B))
    rate = blocks * math.log2(levels) / B if levels > 1 else 1e-12
    return Codebook(values=values, labels=class_spec.labels.copy(), rate_r=rate,
                    distortion_delta=delta,
                    meta={"levels": lv.tolist(), "blocks": blocks, "rho": class_spec.rho})


def _chunks(cb: Codebook, n: int):
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    for start in range(0, len(cb), step):
        yield start, min(start + step, len(cb))


def _check_y(y, n):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise DimensionError(f"measurement length {y.shape} does not match n = {n}")
    return y


def csp_objective(y, m, cb: Codebook) -> np.ndarray:
    """``||y - H c||^2`` for every codeword."""
    A = cb.block_operator(m)
    y = _check_y(y, A.shape[0])
    out = np.empty(len(cb))
    for a, b in _chunks(cb, A.shape[0]):
        out[a:b] = np.sum((y - cb.values[a:b] @ A.T) ** 2, axis=1)
    return out


def csp_sat_objective(y_T, sat_index, T: float, m, cb: Codebook) -> np.ndarray:
    """Saturated objective: clipped locations only penalize ``(Hc)_i <= T``."""
    A = cb.block_operator(m)
    y_T = _check_y(y_T, A.shape[0])
    sat = np.zeros(A.shape[0], dtype=bool)
    sat[np.asarray(sat_index, dtype=np.int64)] = True
    out = np.empty(len(cb))
    for a, b in _chunks(cb, A.shape[0]):
        hc = cb.values[a:b] @ A.T
        sq = (y_T - hc) ** 2
        sq[:, sat] *= hc[:, sat] <= T
        out[a:b] = sq.sum(axis=1)
    return out


def csp_solve_index(y, m, cb: Codebook) -> tuple[int, float]:
    obj = csp_objective(y, m, cb)
    k = int(np.argmin(obj))
    return k, float(obj[k])


def csp_sat_solve_index(y_T, sat_index, T: float, m, cb: Codebook) -> tuple[int, float]:
    obj = csp_sat_objective(y_T, sat_index, T, m, cb)
    k = int(np.argmin(obj))
    return k, float(obj[k])


def csp_solve(y, m, cb: Codebook) -> np.ndarray:
    return cb.codeword(csp_solve_index(y, m, cb)[0])


def csp_sat_solve(y_T, sat_index, T: float, m, cb: Codebook) -> np.ndarray:
    return cb.codeword(csp_sat_solve_index(y_T, sat_index, T, m, cb)[0])
