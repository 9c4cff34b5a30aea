"""HTTP front end over the core package."""
from __future__ import annotations

import base64
import binascii
import json
import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from .. import __version__
from ..errors import BudgetError, DenoiserError, SciError, ValidationError
from ..harness.formats import CSV_HEADER, decode_cube, decode_mask, encode_cube, encode_mask, record_row
from ..harness.metrics import psnr
from ..harness.scenes import SceneSpec, generate_scene
from ..harness.sweep import ExperimentConfig, iter_sweep, sweep_metadata
from ..harness.verify import VerifyConfig, verify_theorem
from ..masks import GENERATOR_NAME, MaskSpec, sample_masks
from ..model import measure
from ..recon import SolverConfig, TvDenoiser, reconstruct
from ..recon.external import ExternalDenoiser
from ..theory import (BoundParams, estimate_ps, monte_carlo_curve, normalized_bound_g, optimal_density,
                      power_curve, theorem_bound, uniform_scene_curve)
from . import schemas as S

RHO = 2.0

app = FastAPI(title="satsci", version=__version__)

_STATUS = [(ValidationError, 422), (BudgetError, 413), (DenoiserError, 502)]


def _error(exc_type: str, message: str, exit_code: int, status: int) -> JSONResponse:
    body = S.ErrorResponse(error=S.ErrorBody(type=exc_type, message=message, exit_code=exit_code))
    return JSONResponse(status_code=status, content=body.model_dump())


@app.exception_handler(SciError)
async def _sci_error(request: Request, exc: SciError):
    status = next((code for cls, code in _STATUS if isinstance(exc, cls)), 500)
    return _error(type(exc).__name__, str(exc), exc.exit_code, status)


@app.exception_handler(RequestValidationError)
async def _request_error(request: Request, exc: RequestValidationError):
    msg = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
    return _error("ValidationError", msg, ValidationError.exit_code, 422)


def _finite(obj):
    """Non-finite floats become the strings ``Infinity``, ``-Infinity`` and ``NaN``."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "NaN" if math.isnan(obj) else ("Infinity" if obj > 0 else "-Infinity")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(s: str, what: str) -> bytes:
    try:
        return base64.b64decode(s, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValidationError(f"{what} is not valid base64") from exc


def _cube(s: str, what: str = "cube") -> np.ndarray:
    return decode_cube(_unb64(s, what))


def _scene(cube: str | None, scene: S.SceneModel | None) -> np.ndarray:
    if cube is not None:
        return _cube(cube)
    return generate_scene(SceneSpec(**(scene or S.SceneModel()).model_dump()))


@app.get("/health", response_model=S.Health)
def health():
    return S.Health(version=__version__, mask_generator=GENERATOR_NAME)


@app.post("/simulate", response_model=S.SimulateResponse)
def simulate(req: S.SimulateRequest):
    x = _scene(req.cube, req.scene)
    n1, n2, B = x.shape
    if req.mask is not None:
        m = decode_mask(_unb64(req.mask, "mask"))
        if m.shape != x.shape:
            raise ValidationError(f"mask shape {m.shape} does not match cube {x.shape}")
    else:
        m = sample_masks(MaskSpec(n1, n2, B, req.p, req.seed))
    if req.T is not None and req.T_over_B is not None:
        raise ValidationError("give T or T_over_B, not both")
    T = req.T if req.T is not None else (req.T_over_B if req.T_over_B is not None else 0.5) * B
    meas = measure(x, m, T, req.noise_sigma, np.random.default_rng(req.noise_seed))
    return S.SimulateResponse(
        measurement=_b64(encode_cube(meas.y_T.reshape(n1, n2, 1, order="F"))),
        mask=_b64(encode_mask(m)),
        truth=_b64(encode_cube(x)),
        T=T,
        n_saturated=int(meas.sat_index.size),
        noise_eps=meas.noise_eps,
        metadata={"mask_generator": m.generator or "file", "p": None if math.isnan(m.p) else m.p, "seed": m.seed,
                  "noise_sigma": req.noise_sigma, "noise_seed": req.noise_seed, "rho": RHO},
    )


def _stored_measurement(y: np.ndarray, T: float | None, sat_tol: float) -> np.ndarray:
    # float32 storage can round a clipped value just above T
    if T is None:
        return y
    over = y > T
    if np.any(y[over] > T + sat_tol):
        raise ValidationError(f"measurement exceeds threshold T={T} by more than {sat_tol}")
    return np.where(over, T, y)


@app.post("/recover", response_model=S.RecoverResponse)
def recover(req: S.RecoverRequest):
    y = _cube(req.measurement, "measurement")
    m = decode_mask(_unb64(req.mask, "mask"))
    if y.shape != (m.shape[0], m.shape[1], 1):
        raise ValidationError(f"measurement shape {y.shape} does not match mask {m.shape}")
    if req.mode == "sapnet" and req.T is None:
        raise ValidationError("sapnet mode needs a threshold T")
    sat_tol = req.sat_tol
    if sat_tol is None:
        sat_tol = float(np.spacing(np.float32(req.T))) if req.T is not None else 0.0
    y_T = _stored_measurement(y[:, :, 0].reshape(-1, order="F"), req.T, sat_tol)
    cfg = SolverConfig(mode="plain_gap" if req.mode == "gap" else "sapnet", T=req.T, mu=req.mu,
                       max_iters=req.max_iters, strength_schedule=req.strength_schedule,
                       tol=req.tol, sat_tol=sat_tol)
    if req.denoiser == "external":
        if not req.external_command:
            raise ValidationError("external denoiser needs a command")
        with ExternalDenoiser(req.external_command, timeout=req.external_timeout) as den:
            res = reconstruct(y_T, m, cfg, den)
    else:
        res = reconstruct(y_T, m, cfg, TvDenoiser(req.tv_inner_iters))
    score = None
    if req.truth is not None:
        truth = _cube(req.truth, "truth")
        if truth.shape != res.x.shape:
            raise ValidationError(f"truth shape {truth.shape} does not match {res.x.shape}")
        score = psnr(truth, res.x, RHO / 2)
    return S.RecoverResponse(cube=_b64(encode_cube(res.x)), iterations=res.iterations,
                             final_fidelity=res.fidelity[-1] if res.fidelity else 0.0,
                             psnr_db=score)


@app.post("/sweep")
def sweep(req: S.ExperimentModel):
    """Stream newline-delimited JSON: one metadata line, then one line per record."""
    cfg = ExperimentConfig.from_dict({**req.model_dump(), "scene": req.scene.model_dump()})

    def lines():
        yield json.dumps({"meta": {**sweep_metadata(cfg), "csv_header": CSV_HEADER}}) + "\n"
        for rec in iter_sweep(cfg):
            yield json.dumps({"row": record_row(rec)}) + "\n"

    return StreamingResponse(lines(), media_type="application/x-ndjson")


@app.post("/bound", response_model=S.BoundResponse)
def bound(req: S.BoundRequest):
    return theorem_bound(BoundParams(**req.model_dump())).as_dict()


@app.post("/ps", response_model=S.PsResponse)
def ps(req: S.PsRequest):
    x = _scene(req.cube, req.scene)
    est, hw = estimate_ps(x, req.T, req.p, req.trials, req.seed)
    return S.PsResponse(estimate=est, half_width=hw, trials=req.trials)


@app.post("/verify-theorem")
def verify(req: S.VerifyRequest):
    return _finite(verify_theorem(VerifyConfig(**req.model_dump())))


def _curve(c: S.CurveModel, B: int):
    if c.kind == "power":
        return power_curve(c.k)
    if c.kind == "uniform":
        return uniform_scene_curve(c.level, B)
    x = _scene(c.cube, c.scene)
    if x.shape[2] != B:
        raise ValidationError(f"curve cube has {x.shape[2]} frames, expected B={B}")
    return monte_carlo_curve(x, c.trials, c.seed)


@app.post("/optimal-p", response_model=S.OptimalPResponse)
def optimal_p(req: S.OptimalPRequest):
    if not req.T_over_B_grid or min(req.T_over_B_grid) <= 0:
        raise ValidationError("T_over_B_grid must be nonempty with positive entries")
    curve = _curve(req.curve, req.B)
    T_grid = [tb * req.B for tb in req.T_over_B_grid]
    rows = []
    for tb, (T, p_star) in zip(req.T_over_B_grid,
                              optimal_density(T_grid, req.B, req.rho, req.delta, req.eps1, req.eps2,
                                              curve, req.p_grid)):
        g = normalized_bound_g(p_star, T, req.B, req.rho, req.delta, req.eps1, req.eps2, curve)
        rows.append(S.OptimalPRow(T_over_B=tb, T=T, p_star=p_star, g_min=float(np.asarray(g).ravel()[0])))
    return S.OptimalPResponse(rows=rows)
