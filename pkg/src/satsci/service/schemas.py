"""Request and response bodies for the HTTP service.

Cubes and masks travel as base64 of the binary file formats, so a payload can
be written to disk byte for byte.
"""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..recon import default_schedule

SceneKind = Literal["moving_square", "bouncing_blob", "bright_field", "imported"]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneModel(Strict):
    kind: SceneKind = "moving_square"
    n1: int = Field(64, ge=1)
    n2: int = Field(64, ge=1)
    B: int = Field(8, ge=1)
    brightness_scale: float = Field(1.0, ge=0)
    seed: int = Field(0, ge=0)
    path: Optional[str] = None


class ErrorBody(BaseModel):
    type: str
    message: str
    exit_code: int


class ErrorResponse(BaseModel):
    error: ErrorBody


class Health(BaseModel):
    status: str = "ok"
    version: str
    mask_generator: str


class SimulateRequest(Strict):
    scene: Optional[SceneModel] = None
    cube: Optional[str] = Field(None, description="base64 cube file; overrides scene")
    mask: Optional[str] = Field(None, description="base64 mask file; otherwise sampled")
    p: float = Field(0.5, gt=0, lt=1)
    seed: int = Field(0, ge=0, description="mask seed")
    T: Optional[float] = Field(None, gt=0)
    T_over_B: Optional[float] = Field(None, gt=0)
    noise_sigma: float = Field(0.0, ge=0)
    noise_seed: int = Field(0, ge=0)


class SimulateResponse(BaseModel):
    measurement: str
    mask: str
    truth: str
    T: float
    n_saturated: int
    noise_eps: float
    metadata: dict


class RecoverRequest(Strict):
    measurement: str
    mask: str
    mode: Literal["gap", "sapnet"] = "sapnet"
    T: Optional[float] = Field(None, gt=0)
    denoiser: Literal["tv", "external"] = "tv"
    external_command: Optional[list[str]] = None
    external_timeout: float = Field(30.0, gt=0)
    max_iters: int = Field(100, ge=1)
    mu: float = Field(1.0, gt=0)
    strength_schedule: list[float] = Field(default_factory=default_schedule, min_length=1)
    tv_inner_iters: int = Field(20, ge=1)
    tol: Optional[float] = Field(None, gt=0)
    sat_tol: Optional[float] = Field(None, ge=0, description="defaults to float32 spacing at T")
    truth: Optional[str] = None


class RecoverResponse(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    cube: str
    iterations: int
    final_fidelity: float
    psnr_db: Optional[float] = None


class ExperimentModel(Strict):
    scene: SceneModel = Field(default_factory=SceneModel)
    density_grid: list[float] = Field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    T_over_B_grid: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    noise_sigma: float = Field(0.0, ge=0)
    solvers: list[Literal["gap_tv", "sapnet", "csp_oracle"]] = Field(default_factory=lambda: ["gap_tv", "sapnet"])
    trials: int = Field(100, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0])
    eps1: float = Field(0.01, gt=0)
    eps2: float = Field(0.01, gt=0)
    max_iters: int = Field(100, ge=1)
    strength_schedule: list[float] = Field(default_factory=default_schedule, min_length=1)
    tv_inner_iters: int = Field(20, ge=1)
    csp_splits: tuple[int, int, int] = (2, 2, 1)
    csp_levels: int = Field(4, ge=1)
    workers: int = Field(1, ge=1)


class BoundRequest(Strict):
    p: float
    T: float
    B: int
    rho: float = 2.0
    delta: float
    r: float
    n: int
    eps1: float = 0.01
    eps2: float = 0.01
    eps_z: float = 0.0
    p_s: float = 0.0


class BoundResponse(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    beta_T: float
    rhs: float
    success_prob_lower: float


class PsRequest(Strict):
    cube: Optional[str] = None
    scene: Optional[SceneModel] = None
    T: float
    p: float
    trials: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)


class PsResponse(BaseModel):
    estimate: float
    half_width: float
    trials: int
    confidence: float = 0.99


class VerifyRequest(Strict):
    n1: int = 8
    n2: int = 8
    B: int = 4
    splits: tuple[int, int, int] = (2, 1, 2)
    levels: int = 8
    p: float = 0.5
    T: Optional[float] = None
    rho: float = 2.0
    trials: int = 500
    eps1: float = 0.01
    eps2: float = 0.01
    noise_sigma: float = 0.0
    seed: int = 0


class CurveModel(Strict):
    kind: Literal["power", "uniform", "monte_carlo"] = "power"
    k: float = Field(2.0, gt=0)
    level: float = Field(1.0, ge=0)
    cube: Optional[str] = None
    scene: Optional[SceneModel] = None
    trials: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)


class OptimalPRequest(Strict):
    T_over_B_grid: list[float] = Field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 11)])
    B: int = Field(8, ge=1)
    rho: float = Field(2.0, gt=0)
    delta: float = Field(0.04, ge=0, description="absolute distortion; 0.04 is 0.01 after dividing by rho^2")
    eps1: float = Field(0.01, gt=0)
    eps2: float = Field(0.01, gt=0)
    curve: CurveModel = Field(default_factory=CurveModel)
    p_grid: Optional[list[float]] = None


class OptimalPRow(BaseModel):
    T_over_B: float
    T: float
    p_star: float
    g_min: float


class OptimalPResponse(BaseModel):
    rows: list[OptimalPRow]
