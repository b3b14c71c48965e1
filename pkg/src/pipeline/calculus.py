"""
Buffering calculus: config validation, the delay and coherence laws, the
startup skip, and the window/release schedule both runtimes follow.

Window k covers media samples [end_k - W, end_k) with end_k = W + k*step,
where W = max(t_i, t_delta) and step = t_delta. Only its newest ``step``
samples are kept, so consecutive windows tile the output. With the startup
skip the first W - step samples bypass the enhancer and window 0 keeps only
[W - step, W); without it window 0 keeps everything it covers.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Any, Union

from pydantic import ValidationError

from src.config.constants import CHANNEL_PRESETS
from src.dsp.enhancers import effective_latency
from src.models.inputs import ChannelModel, EnhancerSpec, PipelineConfig
from src.netem.channel import expected_t_comm, jitter_allowance
from src.utils.clock import to_us
from src.utils.errors import CoherenceWarning, ConfigError, InvalidInput

logger = logging.getLogger(__name__)


# ===========================================
# LAWS
# ===========================================

def total_delay(t_comm: float, t_delta: float, t_a: float) -> float:
    """End-to-end delay: communication plus buffer interval plus algorithm time."""
    return t_comm + t_delta + t_a


def coherent(t_comm: float, t_chunk: float) -> bool:
    """Playback stays gap-free only if a round trip fits in one chunk (inclusive)."""
    if t_chunk <= 0:
        raise InvalidInput("t_chunk must be positive")
    return t_comm <= t_chunk


# ===========================================
# PROFILES
# ===========================================

def resolve_channel(cfg: PipelineConfig) -> ChannelModel:
    """The link actually used: the device itself for the local profile."""
    if cfg.profile == "local":
        base, bandwidth, jitter, sigma = CHANNEL_PRESETS["loopback"]
        return ChannelModel(name="local", base_one_way_ms=base, bandwidth_bps=bandwidth,
                            jitter_ms=jitter, jitter_sigma=sigma, seed=cfg.channel.seed)
    return cfg.channel


def resolve_enhancer(cfg: PipelineConfig) -> EnhancerSpec:
    """Enhancer spec with the device slowdown folded into t_a for the local profile."""
    if cfg.profile == "local" and cfg.device_slowdown != 1.0:
        return cfg.enhancer.model_copy(update={"t_a": cfg.enhancer.t_a * cfg.device_slowdown})
    return cfg.enhancer


def window_seconds(cfg: PipelineConfig) -> float:
    return max(cfg.t_i, cfg.t_delta)


def processing_latency(cfg: PipelineConfig) -> float:
    """t_a charged per window under this config."""
    return effective_latency(resolve_enhancer(cfg), window_seconds(cfg))


def validate_config(cfg: Union[PipelineConfig, dict[str, Any]], check_coherence: bool = True) -> PipelineConfig:
    """
    Validate a pipeline config against the buffering laws.

    Args:
        cfg: Config model or raw mapping
        check_coherence: Estimate t_comm and warn when it exceeds t_chunk

    Returns:
        The validated config

    Raises:
        ConfigError: On structural errors or t_delta <= t_a
    """
    if not isinstance(cfg, PipelineConfig):
        try:
            cfg = PipelineConfig.model_validate(cfg)
        except ValidationError as e:
            raise ConfigError(f"Invalid pipeline config: {e}") from e

    t_a = processing_latency(cfg)
    if not cfg.t_delta > t_a:
        raise ConfigError(
            f"buffer interval must exceed algorithm latency (t_delta={cfg.t_delta}s <= t_a={t_a:.4g}s)"
        )
    if round(cfg.t_delta * cfg.sample_rate) < 1:
        raise ConfigError("t_delta must span at least one sample")
    backend = cfg.enhancer.backend if cfg.enhancer.kind == "emulated" else cfg.enhancer.kind
    if backend == "visual_gated" and cfg.audio_only:
        raise ConfigError("visual_gated enhancement needs video; audio_only is set")

    if check_coherence:
        from src.wire.framing import payload_size

        t_comm = expected_t_comm(resolve_channel(cfg), payload_size(cfg))
        if not coherent(t_comm, cfg.t_chunk):
            message = (
                f"Expected round trip {t_comm * 1000:.1f} ms exceeds t_chunk "
                f"{cfg.t_chunk * 1000:.1f} ms on {cfg.channel.name}: playback will have blank periods"
            )
            logger.warning(message)
            warnings.warn(message, CoherenceWarning, stacklevel=2)
    return cfg


# ===========================================
# STARTUP SKIP
# ===========================================

@dataclass(frozen=True)
class StartupSkip:
    """Leading media forwarded without enhancement."""
    skip_s: float
    first_enhanced_s: float
    active: bool


def apply_startup_skip(cfg: PipelineConfig) -> StartupSkip:
    """
    Size of the bypassed lead-in.

    The first t_i - t_delta seconds are forwarded unenhanced on arrival, so
    enhancement starts at media time t_i - t_delta. A no-op when disabled or
    when t_i <= t_delta.
    """
    skip = cfg.t_i - cfg.t_delta
    if not cfg.startup_skip or skip <= 0:
        return StartupSkip(0.0, 0.0, False)
    return StartupSkip(skip, skip, True)


# ===========================================
# WINDOWS AND SCHEDULE
# ===========================================

@dataclass(frozen=True)
class WindowPlan:
    """Window geometry in samples."""
    chunk_samples: int
    window_samples: int
    step_samples: int
    skip_samples: int
    sample_rate: int

    def end(self, k: int) -> int:
        return self.window_samples + k * self.step_samples

    def start(self, k: int) -> int:
        return self.end(k) - self.window_samples

    def keep_start(self, k: int) -> int:
        if k == 0:
            return self.skip_samples
        return self.end(k) - self.step_samples

    def trigger_chunk(self, k: int) -> int:
        """Last chunk window k needs."""
        return (self.end(k) - 1) // self.chunk_samples

    def first_kept_chunk(self, k: int) -> int:
        return self.keep_start(k) // self.chunk_samples

    def step_us(self, k: int) -> int:
        return k * self.step_samples * 1_000_000 // self.sample_rate

    def samples_us(self, n: int) -> int:
        return n * 1_000_000 // self.sample_rate


def plan_windows(cfg: PipelineConfig) -> WindowPlan:
    window = round(window_seconds(cfg) * cfg.sample_rate)
    step = round(cfg.t_delta * cfg.sample_rate)
    skip = window - step if apply_startup_skip(cfg).active else 0
    return WindowPlan(cfg.chunk_samples, window, step, skip, cfg.sample_rate)


@dataclass(frozen=True)
class Schedule:
    """
    Timing plan shared by client and server, microseconds.

    Times are relative to the arrival of chunk 0 (``base``) except
    ``prebuffer_us``, which is relative to the client's first reception.
    """
    plan: WindowPlan
    t_chunk_us: int
    preprocess_us: int
    processing_us: int
    worker_offset_us: int
    margin_us: int
    lead_us: int
    jitter_fwd_us: int
    hold_us: int
    start_chunks: int
    prebuffer_us: int
    ack_timeout_us: int
    lossy: bool

    def worker_slot_us(self, k: int) -> int:
        return self.worker_offset_us + self.plan.step_us(k)

    def release_slot_us(self, seq: int) -> int:
        return self.hold_us + seq * self.t_chunk_us


def plan_schedule(cfg: PipelineConfig) -> Schedule:
    """
    Worker cadence and release schedule.

    The worker starts window k at base + offset + k*t_delta, where the
    offset is the smallest value that never starts a window before its
    last chunk is preprocessed, so steady-state starts are exactly t_delta
    apart. The server releases chunk n at base + hold + n*t_chunk; hold is
    the lead-in (t_delta with the skip, the window without) plus t_a plus
    the alignment margin the chunk/window grid needs plus the forward
    jitter allowance. ``output_start_threshold`` overrides hold.

    The first release also waits until the output buffer holds
    ``output_start_threshold`` of audio (t_delta when unset), counted in
    whole chunks as ``start_chunks``.
    """
    plan = plan_windows(cfg)
    tc = to_us(cfg.t_chunk)
    pre = to_us(cfg.preprocess_s) if cfg.profile == "cloud" else 0
    t_a = to_us(processing_latency(cfg))
    period = plan.chunk_samples + 1

    offset = max(plan.trigger_chunk(k) * tc - plan.step_us(k) for k in range(period)) + pre
    step = plan.step_us(1)
    window_us = plan.samples_us(plan.window_samples)
    skip_start = (plan.window_samples - plan.step_samples) // plan.chunk_samples * tc

    # slack needed by each window's first kept chunk beyond t_delta + t_a
    candidates = [0, offset - window_us]
    candidates.append(offset - skip_start - step)
    for k in range(1, period + 1):
        need = offset + plan.step_us(k) + t_a - plan.first_kept_chunk(k) * tc
        candidates.append(need - step - t_a)
    margin = max(candidates)

    lead = plan.samples_us(plan.window_samples - plan.skip_samples)
    channel = resolve_channel(cfg)
    jitter = to_us(jitter_allowance(channel))
    if cfg.output_start_threshold is not None:
        hold = to_us(cfg.output_start_threshold)
    else:
        hold = lead + t_a + margin + jitter
    threshold_us = to_us(cfg.output_start_threshold if cfg.output_start_threshold is not None else cfg.t_delta)
    start_chunks = -(-threshold_us // tc)
    prebuffer = to_us(cfg.playout_prebuffer) if cfg.playout_prebuffer is not None else jitter

    schedule = Schedule(
        plan=plan,
        t_chunk_us=tc,
        preprocess_us=pre,
        processing_us=t_a,
        worker_offset_us=offset,
        margin_us=margin,
        lead_us=lead,
        jitter_fwd_us=jitter,
        hold_us=hold,
        start_chunks=start_chunks,
        prebuffer_us=prebuffer,
        ack_timeout_us=to_us(cfg.ack_timeout_s),
        lossy=channel.loss_rate > 0,
    )
    logger.debug(f"Schedule: {schedule}")
    return schedule
