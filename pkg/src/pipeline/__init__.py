from src.pipeline.buffers import BufferState, InputBuffer, OutputBuffer
from src.pipeline.calculus import (
    Schedule,
    StartupSkip,
    WindowPlan,
    apply_startup_skip,
    coherent,
    plan_schedule,
    plan_windows,
    total_delay,
    validate_config,
)
from src.pipeline.client import ClientCore, PlayoutScheduler
from src.pipeline.events import EVENTS, EventLog
from src.pipeline.media import MediaSource, build_media_source
from src.pipeline.server import ServerCore, WindowJob
from src.pipeline.simulation import RunResult, run_simulation, simulate

__all__ = [
    "BufferState",
    "ClientCore",
    "EVENTS",
    "EventLog",
    "InputBuffer",
    "MediaSource",
    "OutputBuffer",
    "PlayoutScheduler",
    "RunResult",
    "Schedule",
    "ServerCore",
    "StartupSkip",
    "WindowJob",
    "WindowPlan",
    "apply_startup_skip",
    "build_media_source",
    "coherent",
    "plan_schedule",
    "plan_windows",
    "run_simulation",
    "simulate",
    "total_delay",
    "validate_config",
]
