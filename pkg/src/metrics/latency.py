"""
Latency decomposition, playout gaps and the per-run report.
"""
import logging
from typing import Optional

import numpy as np

from src.config.constants import GAP_TOLERANCE_S
from src.metrics.quality import quality
from src.models.outputs import ChunkLatency, GapReport, LatencyDecomposition, LatencyStats, RunReport
from src.pipeline.events import EventLog
from src.utils.errors import EmptyPlayback, IncompleteLog, UndefinedMetric

logger = logging.getLogger(__name__)

REQUIRED_EVENTS = ("sent", "arrived_server", "sent_back", "arrived_client")


def latency_stats(values) -> LatencyStats:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return LatencyStats()
    return LatencyStats(
        min=float(arr.min()),
        median=float(np.median(arr)),
        p95=float(np.percentile(arr, 95)),
        max=float(arr.max()),
        mean=float(arr.mean()),
    )


def decompose(log: EventLog) -> LatencyDecomposition:
    """
    Split each delivered chunk's delay into forward network, processing and reverse network time.

    Dropped chunks are skipped.

    Raises:
        IncompleteLog: If a chunk that was not dropped lacks one of the needed events
    """
    chunks: list[ChunkLatency] = []
    missing: list[int] = []
    for seq in log.seqs:
        if seq in log.dropped:
            continue
        ev = log.times(seq)
        if any(name not in ev for name in REQUIRED_EVENTS):
            missing.append(seq)
            continue
        t1 = ev["arrived_server"] - ev["sent"]
        t2 = ev["sent_back"] - ev["arrived_server"]
        t3 = ev["arrived_client"] - ev["sent_back"]
        chunks.append(ChunkLatency(seq=seq, t1=t1, t2=t2, t3=t3, t_delay=t1 + t2 + t3))
    if missing:
        raise IncompleteLog(missing)
    return LatencyDecomposition(
        chunks=chunks,
        t_delay=latency_stats([c.t_delay for c in chunks]),
        t_comm=latency_stats([c.t1 + c.t3 for c in chunks]),
    )


def gap_report(log: EventLog) -> GapReport:
    """
    Count playout gaps: inter-play intervals longer than t_chunk + 1 ms.

    Returns:
        GapReport with the count and the total silence beyond one chunk per gap

    Raises:
        EmptyPlayback: If nothing was played
    """
    played = log.played()
    if not played:
        raise EmptyPlayback("No played events in the log")
    times = np.array([t for _, t in played])
    intervals = np.diff(times)
    over = intervals[intervals > log.t_chunk + GAP_TOLERANCE_S]
    return GapReport(gap_count=int(over.size), gap_total=float(np.sum(over - log.t_chunk)))


def first_playback_delay(log: EventLog, enhanced_only: bool = False) -> Optional[float]:
    """Delay from capture to playout of the first chunk played (or the first enhanced chunk)."""
    candidates = [
        (t, seq) for seq, t in log.event_times("played").items()
        if not enhanced_only or seq in log.enhanced
    ]
    if not candidates:
        return None
    t_play, seq = min(candidates)
    captured = log.times(seq).get("captured")
    return None if captured is None else t_play - captured


def build_report(result) -> RunReport:
    """
    RunReport for a finished run.

    Args:
        result: RunResult from the simulator or the live service

    The run counts as coherent when playback had no gaps.
    """
    log = result.log
    decomposition = decompose(log)
    try:
        gaps = gap_report(log)
    except EmptyPlayback:
        logger.warning("Run played nothing; reporting zero gaps")
        gaps = GapReport()
    try:
        q = quality(result.clean, result.mixture, result.played)
    except UndefinedMetric as e:
        logger.warning(f"Skipping quality: {e}")
        q = None
    report = RunReport(
        chunks=decomposition.chunks,
        t_delay=decomposition.t_delay,
        t_comm=decomposition.t_comm,
        gap_count=gaps.gap_count,
        gap_total=gaps.gap_total,
        quality=q,
        payload_bytes=result.payload_bytes,
        coherent=gaps.gap_count == 0 and bool(log.played()),
        first_playback_delay=first_playback_delay(log),
        first_enhanced_playback_delay=first_playback_delay(log, enhanced_only=True),
        captured=len(log.event_times("captured")),
        played=len(log.played()),
        dropped=len(log.dropped),
        protocol_errors=result.protocol_errors,
    )
    logger.info(
        f"Report: median delay {report.t_delay.median:.3f}s, {report.gap_count} gaps, "
        f"{report.dropped} dropped, coherent={report.coherent}"
    )
    return report
