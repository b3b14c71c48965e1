from src.metrics.latency import build_report, decompose, first_playback_delay, gap_report, latency_stats
from src.metrics.quality import quality
from src.metrics.sweeps import SWEEPS, run_sweep, write_csv

__all__ = [
    "SWEEPS",
    "build_report",
    "decompose",
    "first_playback_delay",
    "gap_report",
    "latency_stats",
    "quality",
    "run_sweep",
    "write_csv",
]
