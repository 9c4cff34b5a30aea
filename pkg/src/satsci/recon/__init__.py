from .gap import MODES, ReconResult, SolverConfig, default_schedule, gap_step, reconstruct, sapnet_residual
from .tv import TvDenoiser, identity_denoiser, tv_denoise, tv_objective

__all__ = [
    "MODES", "ReconResult", "SolverConfig", "TvDenoiser", "default_schedule", "gap_step",
    "identity_denoiser", "reconstruct", "sapnet_residual", "tv_denoise", "tv_objective",
]
