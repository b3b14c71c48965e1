"""
Models package - Pydantic schemas for inputs and outputs.
"""
from src.models.inputs import (
    ChannelModel,
    CliConfig,
    EnhancerSpec,
    PipelineConfig,
    Roi,
    SceneParams,
)
from src.models.outputs import (
    ChunkLatency,
    GapReport,
    LatencyDecomposition,
    LatencyStats,
    QualityReport,
    RunReport,
    SweepResult,
)

__all__ = [
    # Inputs
    "ChannelModel",
    "CliConfig",
    "EnhancerSpec",
    "PipelineConfig",
    "Roi",
    "SceneParams",
    # Outputs
    "ChunkLatency",
    "GapReport",
    "LatencyDecomposition",
    "LatencyStats",
    "QualityReport",
    "RunReport",
    "SweepResult",
]
