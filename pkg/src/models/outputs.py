from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class LatencyStats(BaseModel):
    """Distribution summary in seconds."""
    min: float = 0.0
    median: float = 0.0
    p95: float = 0.0
    max: float = 0.0
    mean: float = 0.0


class ChunkLatency(BaseModel):
    """Per-chunk decomposition: forward network, processing, reverse network."""
    seq: int
    t1: float
    t2: float
    t3: float
    t_delay: float


class LatencyDecomposition(BaseModel):
    chunks: list[ChunkLatency] = Field(default_factory=list)
    t_delay: LatencyStats = Field(default_factory=LatencyStats)
    t_comm: LatencyStats = Field(default_factory=LatencyStats)


class GapReport(BaseModel):
    gap_count: int = Field(0, ge=0)
    gap_total: float = Field(0.0, ge=0)


class QualityReport(BaseModel):
    """SNR triple in dB. Identical signals report +inf."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    input_snr: float
    output_snr: float
    snr_improvement: float


class RunReport(BaseModel):
    """Everything a run produced, minus the raw event log."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    chunks: list[ChunkLatency] = Field(default_factory=list)
    t_delay: LatencyStats = Field(default_factory=LatencyStats)
    t_comm: LatencyStats = Field(default_factory=LatencyStats)
    gap_count: int = 0
    gap_total: float = 0.0
    quality: Optional[QualityReport] = None
    payload_bytes: int = 0
    coherent: bool = False
    first_playback_delay: Optional[float] = None
    first_enhanced_playback_delay: Optional[float] = None
    captured: int = 0
    played: int = 0
    dropped: int = 0
    protocol_errors: int = 0


class SweepResult(BaseModel):
    """Rows of one experiment plus derived summary values (fits, counts)."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    columns: list[str]
    rows: list[dict[str, Any]] = Field(default_factory=list)
    summary: dict[str, Any] = Field(default_factory=dict)
