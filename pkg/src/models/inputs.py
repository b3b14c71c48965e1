from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.constants import (
    CHANNEL_PRESETS,
    DEFAULT_ROI,
    EARLY_DECAY_S,
    FRAME_HEIGHT,
    FRAME_WIDTH,
    IR_BOUNDARY_S,
    IR_LENGTH_S,
    LATE_DECAY_S,
    LATE_ENERGY_RATIO,
    MODEL_REFERENCE_WINDOW_S,
    MODEL_TIERS,
    OVERSUBTRACTION,
    SAMPLE_RATE,
    T_CHUNK,
    VIDEO_FPS,
    ACK_TIMEOUT_S,
    MAX_SEQ_GAP,
)

EnhancerKind = Literal["passthrough", "oracle_mask", "spectral_subtraction", "visual_gated", "emulated"]
BackendKind = Literal["passthrough", "oracle_mask", "spectral_subtraction", "visual_gated"]


# --- Scene ---
class SceneParams(BaseModel):
    """Parameters for synthesizing an acoustic scene."""
    model_config = ConfigDict(extra="forbid")

    n_targets: int = Field(1, ge=1)
    n_noises: int = Field(1, ge=0)
    duration_s: float = Field(4.0, ge=0)
    sample_rate: int = Field(SAMPLE_RATE, gt=0)
    target_snr_db: Optional[float] = 0.0   # None keeps natural levels
    boundary_s: float = Field(IR_BOUNDARY_S, gt=0)
    ir_length_s: float = Field(IR_LENGTH_S, gt=0)
    early_decay_s: float = Field(EARLY_DECAY_S, gt=0)
    late_decay_s: float = Field(LATE_DECAY_S, gt=0)
    late_energy_ratio: float = Field(LATE_ENERGY_RATIO, ge=0)
    f0_min_hz: float = Field(100.0, gt=0)
    f0_max_hz: float = Field(250.0, gt=0)
    source_files: list[str] = Field(default_factory=list)  # optional PCM WAVs replacing synthetic speech
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.boundary_s >= self.ir_length_s:
            raise ValueError("boundary_s must be shorter than ir_length_s")
        if self.f0_min_hz > self.f0_max_hz:
            raise ValueError("f0_min_hz must not exceed f0_max_hz")
        return self


class Roi(BaseModel):
    """Rectangular region of interest in pixels."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    x: int = Field(DEFAULT_ROI[0], ge=0)
    y: int = Field(DEFAULT_ROI[1], ge=0)
    width: int = Field(DEFAULT_ROI[2], ge=1)
    height: int = Field(DEFAULT_ROI[3], ge=1)

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.width <= width and self.y + self.height <= height


# --- Enhancer ---
class EnhancerSpec(BaseModel):
    """
    Enhancer selection and its latency model.

    kind=emulated charges t_a scaled by window length / reference window
    and runs ``backend`` for the audio itself. ``preset`` fills t_a,
    emulated_params and reference_window_s from the model tier table.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: EnhancerKind = "passthrough"
    t_a: float = Field(0.0, ge=0)
    t_i: float = Field(MODEL_REFERENCE_WINDOW_S, gt=0)
    emulated_params: Optional[int] = Field(None, ge=0)
    reference_window_s: Optional[float] = Field(None, gt=0)
    backend: BackendKind = "passthrough"
    oversubtraction: float = Field(OVERSUBTRACTION, ge=0)
    preset: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _expand_preset(cls, data: Any) -> Any:
        if isinstance(data, str):
            data = {"preset": data} if data in MODEL_TIERS else {"kind": data}
        if not isinstance(data, dict) or not data.get("preset"):
            return data
        name = data["preset"]
        if name not in MODEL_TIERS:
            raise ValueError(f"Unknown model tier {name!r}; expected one of {sorted(MODEL_TIERS)}")
        t_a, params = MODEL_TIERS[name]
        defaults = {
            "kind": "emulated",
            "t_a": t_a,
            "emulated_params": params,
            "reference_window_s": MODEL_REFERENCE_WINDOW_S,
        }
        return {**defaults, **data}

    @property
    def reference_s(self) -> float:
        """Window length at which t_a is quoted."""
        return self.reference_window_s or self.t_i


# --- Channel ---
class ChannelModel(BaseModel):
    """Emulated one-way link characteristics."""
    model_config = ConfigDict(extra="forbid", frozen=True, ser_json_inf_nan="constants")

    name: str = "custom"
    base_one_way_ms: float = Field(0.0, ge=0)
    bandwidth_bps: float = Field(float("inf"), gt=0)
    jitter_ms: float = Field(0.0, ge=0)        # lognormal median
    jitter_sigma: float = Field(0.0, ge=0)     # lognormal shape
    loss_rate: float = Field(0.0, ge=0, lt=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _expand_preset(cls, data: Any) -> Any:
        if isinstance(data, str):
            data = {"preset": data}
        if not isinstance(data, dict):
            return data
        data = dict(data)
        name = data.pop("preset", None)
        if name is None:
            return data
        if name not in CHANNEL_PRESETS:
            raise ValueError(f"Unknown channel preset {name!r}; expected one of {sorted(CHANNEL_PRESETS)}")
        base, bandwidth, jitter, sigma = CHANNEL_PRESETS[name]
        defaults = {
            "name": name,
            "base_one_way_ms": base,
            "bandwidth_bps": bandwidth,
            "jitter_ms": jitter,
            "jitter_sigma": sigma,
        }
        return {**defaults, **data}


# --- Pipeline ---
class PipelineConfig(BaseModel):
    """
    Buffering calculus and run parameters.

    Structural invariants are checked here; the t_delta > t_a rule and the
    coherence warning live in ``src.pipeline.calculus.validate_config``.
    """
    model_config = ConfigDict(extra="forbid")

    t_chunk: float = Field(T_CHUNK, gt=0)
    t_i: float = Field(10.0, gt=0)
    t_delta: float = Field(2.35, gt=0)
    enhancer: EnhancerSpec = Field(default_factory=lambda: EnhancerSpec(kind="emulated", t_a=2.2))
    startup_skip: bool = True
    output_start_threshold: Optional[float] = Field(None, ge=0)   # server hold override, seconds
    playout_prebuffer: Optional[float] = Field(None, ge=0)        # client prebuffer override, seconds
    channel: ChannelModel = Field(default_factory=lambda: ChannelModel(preset="ethernet"))
    mode: Literal["sim", "live"] = "sim"
    profile: Literal["cloud", "edge", "local"] = "cloud"
    device_slowdown: float = Field(1.0, ge=1)
    quality: Optional[int] = Field(None, ge=1, le=100)           # None sends raw frames
    audio_only: bool = False
    sample_rate: int = Field(SAMPLE_RATE, gt=0)
    fps: float = Field(VIDEO_FPS, gt=0)
    frame_width: int = Field(FRAME_WIDTH, ge=1)
    frame_height: int = Field(FRAME_HEIGHT, ge=1)
    roi: Roi = Field(default_factory=Roi)
    preprocess_s: float = Field(0.0, ge=0)
    ack_timeout_s: float = Field(ACK_TIMEOUT_S, gt=0)
    max_seq_gap: int = Field(MAX_SEQ_GAP, ge=1)                   # chunks, beyond which a seq jump is refused
    host: str = "127.0.0.1"
    port: int = Field(8765, ge=0, le=65535)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_structure(self):
        if self.t_i < self.t_chunk:
            raise ValueError("t_i must be at least t_chunk")
        samples = self.t_chunk * self.sample_rate
        if abs(samples - round(samples)) > 1e-6:
            raise ValueError("t_chunk must span a whole number of samples")
        if not self.roi.fits(self.frame_width, self.frame_height):
            raise ValueError("roi lies outside the frame")
        if self.enhancer.t_i != self.t_i:
            # the pipeline window is authoritative
            self.enhancer = self.enhancer.model_copy(update={"t_i": self.t_i})
        return self

    @property
    def chunk_samples(self) -> int:
        return round(self.t_chunk * self.sample_rate)


# --- CLI ---
class CliConfig(BaseModel):
    """Resolved command-line invocation."""
    model_config = ConfigDict(extra="forbid")

    subcommand: Literal["synth", "run", "sweep", "report", "serve"]
    config_path: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0)
    output_dir: str = "runs"
    log_level: str = "INFO"
