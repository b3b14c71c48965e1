"""
Image and CSV-grid exports: latency histogram, spectrogram heatmaps, sweep plots.
"""
import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.dsp.stft import Spectrogram  # noqa: E402
from src.models.outputs import RunReport, SweepResult  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# x column, y column, plot kind per sweep
SWEEP_AXES = {
    "networks": ("preset", "rtt_ms", "box"),
    "compression": ("quality", "payload_bytes", "line"),
    "chunk_size": ("frames", "latency_s", "line"),
    "coherence": ("preset", "gap_count", "bar"),
    "models": ("model", "t_a_ms", "bar"),
}


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def latency_histogram(report: RunReport, path: PathLike) -> Path:
    """Histogram of per-chunk end-to-end delay."""
    delays = [c.t_delay for c in report.chunks]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(delays, bins=40, color="tab:blue")
    ax.axvline(report.t_delay.median, color="black", linestyle="--", label="median")
    ax.set_xlabel("t_delay [s]")
    ax.set_ylabel("chunks")
    ax.legend()
    return _save(fig, path)


def spectrogram_heatmap(spec: Spectrogram, path: PathLike, title: str = "") -> Path:
    """Magnitude in dB over time and frequency."""
    db = 20.0 * np.log10(np.maximum(spec.magnitude, 1e-10))
    times = np.arange(spec.n_frames) * spec.hop / spec.sample_rate
    freqs = np.arange(spec.n_bins) * spec.sample_rate / spec.fft_size
    fig, ax = plt.subplots(figsize=(8, 3.5))
    mesh = ax.pcolormesh(times, freqs, db.T, shading="auto", cmap="magma", vmin=db.max() - 80, vmax=db.max())
    fig.colorbar(mesh, ax=ax, label="dB")
    ax.set_xlabel("Time [s]")
    ax.set_ylabel("Frequency [Hz]")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def write_grid_csv(values: np.ndarray, path: PathLike) -> Path:
    """Frames x bins grid (spectrogram magnitude or mask) as plain CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(values, dtype=np.float64), delimiter=",", fmt="%.6g")
    return path


def sweep_plot(result: SweepResult, path: PathLike) -> Path:
    x_col, y_col, kind = SWEEP_AXES[result.name]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if kind == "box":
        labels = list(dict.fromkeys(r[x_col] for r in result.rows))
        data = [[r[y_col] for r in result.rows if r[x_col] == label] for label in labels]
        ax.boxplot(data)
        ax.set_xticks(range(1, len(labels) + 1), labels)
    elif kind == "line":
        ax.plot([r[x_col] for r in result.rows], [r[y_col] for r in result.rows], "o-")
    else:
        labels = [
            f"{r[x_col]}/{r['payload']}" if "payload" in r else str(r[x_col]) for r in result.rows
        ]
        ax.bar(range(len(labels)), [r[y_col] for r in result.rows])
        ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    ax.set_title(result.name)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)
