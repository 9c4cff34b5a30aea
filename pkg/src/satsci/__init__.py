"""Snapshot compressive imaging under sensor saturation."""
from .masks import MaskSpec, default_density_grid, sample_masks
from .model import MaskSet, Measurement, ModelParams, adjoint, clip, forward, gram_diagonal, measure, saturated_indices

__version__ = "0.1.0"

__all__ = [
    "MaskSet", "MaskSpec", "Measurement", "ModelParams", "adjoint", "clip", "default_density_grid",
    "forward", "gram_diagonal", "measure", "sample_masks", "saturated_indices",
]
