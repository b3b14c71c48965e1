"""
Audio and visual feature maps and their concatenation fusion.

Feature maps are H x W x D tensors. Fusion interleaves channels so that,
counting from one, channel 2d-1 holds video channel d and channel 2d holds
audio channel d.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.config.constants import FFT_SIZE, HOP_SIZE, SAMPLE_RATE, VIDEO_FPS
from src.dsp.stft import Spectrogram
from src.models.inputs import Roi
from src.utils.errors import InvalidInput, ShapeError
from src.wire.types import VideoFrame

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Real H x W x D tensor anchored to a chunk sequence number."""
    data: np.ndarray
    time_anchor: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3 or min(data.shape) < 1:
            raise ShapeError(f"Feature map must be H x W x D with every dimension >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidInput("Feature map entries must be finite")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def audio_features(spec: Spectrogram) -> FeatureMap:
    """log(1 + |X|) per frame and bin, one channel."""
    return FeatureMap(np.log1p(spec.magnitude)[:, :, np.newaxis])


def lip_activity(frames: Sequence[VideoFrame], roi: Roi) -> np.ndarray:
    """
    Mean absolute inter-frame difference inside roi, scaled to [0, 1].

    The first frame reuses the activity of the second so there is one value
    per frame.
    """
    if len(frames) < 2:
        raise InvalidInput("Lip activity needs at least two frames")
    for frame in frames:
        if not roi.fits(frame.width, frame.height):
            raise InvalidInput(f"ROI {roi} lies outside a {frame.width}x{frame.height} frame")
    stack = np.stack([f.pixels[roi.y: roi.y + roi.height, roi.x: roi.x + roi.width] for f in frames])
    diffs = np.abs(np.diff(stack.astype(np.int16), axis=0)).mean(axis=(1, 2)) / 255.0
    return np.concatenate([diffs[:1], diffs])


def visual_features(
    frames: Sequence[VideoFrame],
    roi: Roi,
    audio_frames: Optional[int] = None,
    hop: int = HOP_SIZE,
    fft_size: int = FFT_SIZE,
    sample_rate: int = SAMPLE_RATE,
    fps: float = VIDEO_FPS,
    offset_s: float = 0.0,
) -> FeatureMap:
    """
    Lip activity resampled to the STFT frame rate.

    Each audio frame takes the activity of the video frame covering its
    centre (nearest-neighbour hold). Without audio_frames the map keeps one
    row per video frame.

    Args:
        frames: At least two frames
        roi: Mouth region
        audio_frames: Number of STFT frames to align to
        offset_s: Time of the first audio sample relative to the first frame
    """
    activity = lip_activity(frames, roi)
    if audio_frames is None:
        return FeatureMap(activity[:, np.newaxis, np.newaxis])
    centres = offset_s + (np.arange(audio_frames) * hop + fft_size / 2) / sample_rate
    index = np.clip(np.floor(centres * fps).astype(np.int64), 0, len(activity) - 1)
    return FeatureMap(activity[index][:, np.newaxis, np.newaxis])


def concat_fuse(audio: FeatureMap, video: FeatureMap) -> FeatureMap:
    """
    Interleave channels: video channel d at 0-based index 2d, audio at 2d + 1.

    Raises:
        ShapeError: If the maps differ in shape
    """
    if audio.shape != video.shape:
        raise ShapeError(f"Cannot fuse audio {audio.shape} with video {video.shape}")
    h, w, d = audio.shape
    fused = np.empty((h, w, 2 * d))
    fused[:, :, 0::2] = video.data
    fused[:, :, 1::2] = audio.data
    return FeatureMap(fused, audio.time_anchor)


def split_fused(fused: FeatureMap) -> tuple[FeatureMap, FeatureMap]:
    """Inverse of concat_fuse: returns (audio, video)."""
    if fused.shape[2] % 2:
        raise ShapeError("A fused map has an even channel count")
    return (
        FeatureMap(fused.data[:, :, 1::2].copy(), fused.time_anchor),
        FeatureMap(fused.data[:, :, 0::2].copy(), fused.time_anchor),
    )


def broadcast_to(feature: FeatureMap, shape: tuple[int, int, int]) -> FeatureMap:
    """Repeat a map along singleton axes to match shape."""
    try:
        return FeatureMap(np.broadcast_to(feature.data, shape).copy(), feature.time_anchor)
    except ValueError as e:
        raise ShapeError(f"Cannot broadcast {feature.shape} to {shape}") from e
