from __future__ import annotations

import asyncio
import logging
import math
from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException, Request, Response
from pydantic import BaseModel, Field, ValidationError

from src.api.middleware import limiter
from src.config.constants import CHANNEL_PRESETS, MODEL_TIERS, NETWORK_PRESETS, SWEEP_NAMES
from src.config.settings import settings
from src.dsp.params import tier_footprint
from src.metrics.latency import build_report
from src.metrics.sweeps import run_sweep
from src.models.inputs import SceneParams
from src.pipeline.calculus import validate_config
from src.pipeline.simulation import run_simulation
from src.utils.errors import ConfigError

pipeline = APIRouter(tags=["Pipeline"])
logger = logging.getLogger(__name__)


class SimulateInput(BaseModel):
    """Body of POST /simulate; ``pipeline`` and ``scene`` take the same keys as a config file."""
    pipeline: Dict[str, Any] = Field(default_factory=dict)
    scene: Dict[str, Any] = Field(default_factory=dict)
    duration_s: float = Field(4.0, gt=0)


class SweepInput(BaseModel):
    seed: int = Field(0, ge=0)


def _json(model: BaseModel) -> Response:
    # model JSON keeps +inf SNRs and bandwidths as Infinity
    return Response(content=model.model_dump_json(), media_type="application/json")


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


# ============================================
# PRESETS
# ============================================


@pipeline.get("/presets")
async def get_presets():
    """Channel presets and model tiers the pipeline config accepts by name."""
    channels = {
        name: {
            "base_one_way_ms": base,
            "bandwidth_bps": _finite(bandwidth),
            "jitter_ms": jitter,
            "jitter_sigma": sigma,
            "swept": name in NETWORK_PRESETS,
        }
        for name, (base, bandwidth, jitter, sigma) in CHANNEL_PRESETS.items()
    }
    models = {name: tier_footprint(name) for name in MODEL_TIERS}
    return {"channels": channels, "models": models, "sweeps": list(SWEEP_NAMES)}


# ============================================
# SIMULATION
# ============================================


@pipeline.post("/simulate")
@limiter.limit("10/minute")
async def simulate_run(request: Request, payload: SimulateInput):
    """
    Run one simulated session and return its report.
    The simulator is CPU bound and runs in a worker thread.
    """
    if payload.duration_s > settings.MAX_SIM_DURATION_S:
        raise HTTPException(400, f"duration_s is capped at {settings.MAX_SIM_DURATION_S}s")

    request.state.run_label = f"simulate {payload.duration_s}s overrides={sorted(payload.pipeline) or 'none'}"
    cfg = validate_config({**payload.pipeline, "mode": "sim"})
    request.state.run_label = (
        f"simulate {payload.duration_s}s t_i={cfg.t_i} t_delta={cfg.t_delta} "
        f"enhancer={cfg.enhancer.kind} channel={cfg.channel.name} seed={cfg.seed}"
    )
    try:
        scene = SceneParams.model_validate({"seed": cfg.seed, **payload.scene})
    except ValidationError as e:
        raise ConfigError(f"Invalid scene parameters: {e}") from e

    result = await asyncio.to_thread(run_simulation, cfg, payload.duration_s, None, scene)
    report = build_report(result)
    logger.info(
        f"Simulated {payload.duration_s}s on {cfg.channel.name}: "
        f"median delay {report.t_delay.median:.3f}s, {report.gap_count} gaps"
    )
    return _json(report)


# ============================================
# SWEEPS
# ============================================


@pipeline.post("/sweeps/{name}")
@limiter.limit("2/minute")
async def run_named_sweep(request: Request, name: str, payload: Optional[SweepInput] = None):
    """Run a named experiment; rows and summary come back as JSON."""
    if name not in SWEEP_NAMES:
        raise HTTPException(404, f"Unknown sweep {name!r}. Must be one of: {list(SWEEP_NAMES)}")
    seed = payload.seed if payload else 0
    request.state.run_label = f"sweep {name} seed={seed}"
    result = await asyncio.to_thread(run_sweep, name, seed)
    return _json(result)
