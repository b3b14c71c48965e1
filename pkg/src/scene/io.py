"""
16-bit PCM WAV and frame-stack I/O.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from src.config.constants import PCM_SCALE
from src.scene.signals import Signal
from src.utils.errors import InvalidInput
from src.wire.types import VideoFrame

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_pcm(samples: np.ndarray) -> np.ndarray:
    """Float [-1, 1] to int16 with rounding and clipping."""
    return np.clip(np.rint(np.asarray(samples) * PCM_SCALE), -32768, 32767).astype(np.int16)


def from_pcm(pcm: np.ndarray) -> np.ndarray:
    return np.asarray(pcm, dtype=np.int16).astype(np.float64) / PCM_SCALE


def write_wav(path: PathLike, signal: Signal) -> Path:
    """Write a mono 16-bit little-endian PCM WAV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), to_pcm(signal.samples), signal.sample_rate, subtype="PCM_16", format="WAV")
    logger.debug(f"Wrote {path} ({len(signal)} samples)")
    return path


def read_wav(path: PathLike) -> Signal:
    """Read a WAV as a float Signal; multichannel files are rejected."""
    data, sr = sf.read(str(path), dtype="int16", always_2d=True)
    if data.shape[1] != 1:
        raise InvalidInput(f"{path} has {data.shape[1]} channels; only mono is supported")
    return Signal(from_pcm(data[:, 0]), sr)


def write_frames(path: PathLike, frames: list[VideoFrame]) -> Path:
    """Store frames as one uint8 array of shape (n, height, width)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stack = np.stack([f.pixels for f in frames]) if frames else np.zeros((0, 0, 0), dtype=np.uint8)
    np.save(path, stack)
    return path


def read_frames(path: PathLike) -> list[VideoFrame]:
    stack = np.load(path)
    return [VideoFrame(p.shape[1], p.shape[0], p) for p in stack]
