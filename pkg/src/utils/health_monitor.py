"""
Pipeline Monitoring Service.
Tracks sessions, per-stage latency, protocol errors and concealed chunks for the live server.
"""

import time
import logging
import asyncio
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)

# Server-side stages, each measured per chunk in milliseconds
MONITORED_STAGES = ["preprocess", "queue", "enhance", "hold"]
MAX_SAMPLES = 100


@dataclass
class StageMetrics:
    """Latency samples for one pipeline stage (last MAX_SAMPLES)."""
    latency_samples: List[float] = field(default_factory=list)
    count: int = 0


@dataclass
class SessionMetrics:
    session_id: str
    started: float
    finished: Optional[float] = None
    chunks: int = 0
    concealed: int = 0
    protocol_errors: int = 0


class PipelineMonitor:
    """
    Singleton monitor shared by every live server in the process.
    Thread-safe for concurrent access.
    """

    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._stages: Dict[str, StageMetrics] = {stage: StageMetrics() for stage in MONITORED_STAGES}
        self._sessions: Dict[str, SessionMetrics] = {}
        self._metrics_lock = asyncio.Lock()
        self._start_time = time.time()
        self._initialized = True
        logger.info("PipelineMonitor initialized")

    async def reset(self) -> None:
        async with self._metrics_lock:
            self._stages = {stage: StageMetrics() for stage in MONITORED_STAGES}
            self._sessions = {}
            self._start_time = time.time()

    async def session_started(self, session_id: str) -> None:
        async with self._metrics_lock:
            self._sessions[session_id] = SessionMetrics(session_id, time.time())

    async def session_finished(self, session_id: str, concealed: int = 0) -> None:
        async with self._metrics_lock:
            session = self._sessions.get(session_id)
            if session is not None:
                session.finished = time.time()
                session.concealed = concealed

    async def record_chunk(self, session_id: str, stages_ms: Dict[str, float]) -> None:
        """
        Record one released chunk's stage latencies.

        Args:
            session_id: Live session the chunk belongs to
            stages_ms: Stage name -> milliseconds; unknown stages are ignored
        """
        async with self._metrics_lock:
            session = self._sessions.get(session_id)
            if session is not None:
                session.chunks += 1
            for stage, value in stages_ms.items():
                metrics = self._stages.get(stage)
                if metrics is None:
                    continue
                metrics.count += 1
                metrics.latency_samples.append(value)
                if len(metrics.latency_samples) > MAX_SAMPLES:
                    metrics.latency_samples.pop(0)

    async def record_protocol_error(self, session_id: str) -> None:
        async with self._metrics_lock:
            session = self._sessions.get(session_id)
            if session is not None:
                session.protocol_errors += 1

    async def get_metrics(self) -> Dict[str, dict]:
        """
        Snapshot of stage latencies and session counters.

        Returns:
            {"uptime_s", "sessions": {...}, "stages": {stage: {count, min/avg/p95/max ms}}}
        """
        async with self._metrics_lock:
            stages = {}
            for stage, metrics in self._stages.items():
                samples = metrics.latency_samples
                if not samples:
                    stages[stage] = {"count": 0, "latency_min_ms": 0, "latency_avg_ms": 0,
                                     "latency_p95_ms": 0, "latency_max_ms": 0}
                    continue
                ordered = sorted(samples)
                stages[stage] = {
                    "count": metrics.count,
                    "latency_min_ms": round(ordered[0], 1),
                    "latency_avg_ms": round(sum(ordered) / len(ordered), 1),
                    "latency_p95_ms": round(ordered[min(len(ordered) - 1, int(len(ordered) * 0.95))], 1),
                    "latency_max_ms": round(ordered[-1], 1),
                }
            sessions = list(self._sessions.values())
            return {
                "uptime_s": round(time.time() - self._start_time, 1),
                "sessions": {
                    "total": len(sessions),
                    "active": sum(1 for s in sessions if s.finished is None),
                    "chunks": sum(s.chunks for s in sessions),
                    "concealed": sum(s.concealed for s in sessions),
                    "protocol_errors": sum(s.protocol_errors for s in sessions),
                },
                "stages": stages,
            }


# Singleton instance
pipeline_monitor = PipelineMonitor()
