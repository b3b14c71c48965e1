"""
Named experiments producing one CSV row per point.

  networks     RTT_SAMPLES round trips of a raw chunk per channel preset
  compression  payload size and pixel error per codec quality
  chunk_size   emulated processing latency per window length in frames
  coherence    simulated playout gaps per preset and payload
  models       charged latency and memory footprint per model tier
"""
import csv
import logging
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy.stats import linregress

from src.config.constants import (
    CHUNK_SIZE_FRAMES,
    COMPRESSION_QUALITIES,
    DEFAULT_QUALITY,
    MODEL_REFERENCE_WINDOW_S,
    MODEL_TIERS,
    NETWORK_PRESETS,
    RTT_SAMPLES,
)
from src.dsp.enhancers import MediaWindow, enhance
from src.dsp.params import tier_footprint
from src.metrics.latency import gap_report
from src.models.inputs import EnhancerSpec, PipelineConfig
from src.models.outputs import SweepResult
from src.netem.channel import expected_t_comm, preset, rtt_experiment
from src.pipeline.calculus import coherent
from src.pipeline.media import build_media_source
from src.pipeline.simulation import run_simulation
from src.scene.video import face_frame
from src.utils.clock import SimClock, to_s
from src.utils.errors import InvalidInput
from src.wire.codec import compress_frame, decompress_frame, mean_abs_error
from src.wire.framing import MEDIA_OVERHEAD, payload_size

logger = logging.getLogger(__name__)

COMPRESSION_CORPUS_FRAMES = 50
COHERENCE_DURATION_S = 6.0


def _default_config(**overrides) -> PipelineConfig:
    return PipelineConfig(**overrides)


def _emulated_latency(spec: EnhancerSpec, window_s: float, sample_rate: int) -> float:
    """Latency one emulated run charges on a silent window, read off a virtual clock."""
    window = MediaWindow(np.zeros(int(round(window_s * sample_rate))), sample_rate)
    clock = SimClock()
    enhance(window, spec.model_copy(update={"t_i": window_s}), clock=clock)
    return to_s(clock.now_us())


# ===========================================
# EXPERIMENTS
# ===========================================

def sweep_networks(seed: int = 0, n: int = RTT_SAMPLES, presets=NETWORK_PRESETS) -> SweepResult:
    cfg = _default_config()
    size = payload_size(cfg, "raw")
    rows = []
    summary = {}
    for name in presets:
        samples = rtt_experiment(preset(name), size, n=n, seed=seed)
        rows.extend(
            {"preset": name, "trial": i, "payload_bytes": size, "rtt_ms": float(v)} for i, v in enumerate(samples)
        )
        median = float(np.median(samples))
        summary[name] = {"median_rtt_ms": median, "coherent": coherent(median / 1000.0, cfg.t_chunk)}
    return SweepResult(name="networks", columns=["preset", "trial", "payload_bytes", "rtt_ms"],
                       rows=rows, summary=summary)


def compression_corpus(n_frames: int = COMPRESSION_CORPUS_FRAMES, cfg: Optional[PipelineConfig] = None):
    """A smooth talking-face sequence: the mouth opens and closes over n_frames."""
    cfg = cfg or _default_config()
    openings = 0.5 - 0.5 * np.cos(np.linspace(0.0, 4.0 * np.pi, n_frames))
    return [face_frame(o, cfg.frame_width, cfg.frame_height, cfg.roi) for o in openings]


def sweep_compression(seed: int = 0, qualities=COMPRESSION_QUALITIES) -> SweepResult:
    cfg = _default_config()
    frames = compression_corpus(cfg=cfg)
    raw_payload = payload_size(cfg, "raw")
    rows = []
    for q in qualities:
        streams = [compress_frame(f, q) for f in frames]
        errors = [mean_abs_error(f, decompress_frame(s)) for f, s in zip(frames, streams)]
        frame_bytes = float(np.mean([len(s) for s in streams]))
        wire = MEDIA_OVERHEAD + 2 * cfg.chunk_samples + frame_bytes
        rows.append({
            "quality": q,
            "frame_bytes": frame_bytes,
            "payload_bytes": wire,
            "reduction": raw_payload / wire,
            "mean_abs_error": float(np.mean(errors)),
        })
    sizes = [r["payload_bytes"] for r in rows]
    summary = {
        "raw_payload_bytes": raw_payload,
        "monotone": bool(all(a >= b for a, b in zip(sizes, sizes[1:]))),
    }
    return SweepResult(name="compression",
                       columns=["quality", "frame_bytes", "payload_bytes", "reduction", "mean_abs_error"],
                       rows=rows, summary=summary)


def sweep_chunk_size(seed: int = 0, frames=CHUNK_SIZE_FRAMES, tier: str = "model_1") -> SweepResult:
    cfg = _default_config()
    spec = EnhancerSpec(preset=tier)
    rows = []
    for n in frames:
        window_s = n * cfg.t_chunk
        rows.append({
            "frames": n,
            "window_s": window_s,
            "latency_s": _emulated_latency(spec, window_s, cfg.sample_rate),
        })
    x = np.array([r["frames"] for r in rows], dtype=np.float64)
    y = np.array([r["latency_s"] for r in rows])
    fit = linregress(x, y)
    summary = {
        "tier": tier,
        "slope_s_per_frame": float(fit.slope),
        "intercept_s": float(fit.intercept),
        "r_squared": float(fit.rvalue ** 2),
        "ratio_last_first": float(y[-1] / y[0]),
    }
    return SweepResult(name="chunk_size", columns=["frames", "window_s", "latency_s"], rows=rows, summary=summary)


def sweep_coherence(
    seed: int = 0,
    presets=NETWORK_PRESETS,
    payloads=("raw", DEFAULT_QUALITY),
    duration_s: float = COHERENCE_DURATION_S,
) -> SweepResult:
    """
    Simulated playout per preset and payload with a short emulated window.

    The media source is built once and shared by every run.
    """
    base = _default_config(
        t_i=2.0, t_delta=0.8, enhancer=EnhancerSpec(kind="emulated", t_a=0.5), seed=seed,
    )
    source = build_media_source(base, duration_s)
    rows = []
    for name in presets:
        for payload in payloads:
            quality = None if payload == "raw" else int(payload)
            cfg = base.model_copy(update={"channel": preset(name, seed=seed), "quality": quality})
            size = payload_size(cfg)
            expected = expected_t_comm(cfg.channel, size)
            result = run_simulation(cfg, duration_s, source=source)
            gaps = gap_report(result.log)
            rows.append({
                "preset": name,
                "payload": payload,
                "payload_bytes": size,
                "expected_rtt_ms": expected * 1000.0,
                "coherent_expected": coherent(expected, cfg.t_chunk),
                "gap_count": gaps.gap_count,
                "gap_total_s": gaps.gap_total,
            })
    summary = {
        "agree": all(r["coherent_expected"] == (r["gap_count"] == 0) for r in rows),
    }
    return SweepResult(
        name="coherence",
        columns=["preset", "payload", "payload_bytes", "expected_rtt_ms", "coherent_expected",
                 "gap_count", "gap_total_s"],
        rows=rows,
        summary=summary,
    )


def sweep_models(seed: int = 0, tiers=tuple(MODEL_TIERS)) -> SweepResult:
    cfg = _default_config()
    rows = []
    for name in tiers:
        footprint = tier_footprint(name)
        latency = _emulated_latency(EnhancerSpec(preset=name), MODEL_REFERENCE_WINDOW_S, cfg.sample_rate)
        rows.append({
            "model": name,
            "t_a_ms": latency * 1000.0,
            "parameters": footprint["parameters"],
            "bytes": footprint["bytes"],
            "size": footprint["size"],
        })
    return SweepResult(name="models", columns=["model", "t_a_ms", "parameters", "bytes", "size"], rows=rows)


SWEEPS: dict[str, Callable[..., SweepResult]] = {
    "networks": sweep_networks,
    "compression": sweep_compression,
    "chunk_size": sweep_chunk_size,
    "coherence": sweep_coherence,
    "models": sweep_models,
}


def run_sweep(name: str, seed: int = 0, **kwargs: Any) -> SweepResult:
    """
    Run a named sweep.

    Raises:
        InvalidInput: Unknown sweep name
    """
    if name not in SWEEPS:
        raise InvalidInput(f"Unknown sweep {name!r}; expected one of {list(SWEEPS)}")
    logger.info(f"Running sweep {name} (seed={seed})")
    result = SWEEPS[name](seed=seed, **kwargs)
    logger.info(f"Sweep {name}: {len(result.rows)} rows")
    return result


def write_csv(result: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=result.columns)
        writer.writeheader()
        for row in result.rows:
            writer.writerow({k: row[k] for k in result.columns})
    logger.info(f"Wrote {len(result.rows)} rows to {path}")
    return path
