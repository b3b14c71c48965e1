"""
Enhancer backends behind one entry point.

``enhance`` takes a buffered media window and returns processed audio of the
same length together with the processing latency it charges. The emulated
kind reproduces a model tier's timing: its latency scales with the window
length relative to the tier's reference window, and the audio itself comes
from ``spec.backend``.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter1d

from src.config.constants import FFT_SIZE, HOP_SIZE, VIDEO_FPS, VISUAL_GAIN_FLOOR
from src.dsp.features import audio_features, broadcast_to, concat_fuse, split_fused, visual_features
from src.dsp.masks import estimate_noise_profile, oracle_mask, subtraction_gain
from src.dsp.stft import Spectrogram, istft, stft
from src.models.inputs import EnhancerSpec, Roi
from src.scene.signals import Signal
from src.utils.clock import SimClock, WallClock, to_us
from src.utils.errors import InsufficientInput, InvalidInput
from src.wire.types import VideoFrame

logger = logging.getLogger(__name__)

# activity is held over +-2 video frames so steady vowels keep the gate open
ACTIVITY_HOLD_FRAMES = 5
WINDOW_TOLERANCE_S = 1e-9


@dataclass(frozen=True, eq=False)
class MediaWindow:
    """
    A slice of buffered media handed to the enhancer.

    Attributes:
        audio: Float samples in [-1, 1]
        frames: One frame (or mouth crop) per chunk, in order
        roi: Mouth region inside ``frames``
        start_s: Media time of the first sample
        frames_start_s: Media time at which frames[0] begins
    """
    audio: np.ndarray
    sample_rate: int
    frames: Sequence[VideoFrame] = field(default_factory=list)
    roi: Optional[Roi] = None
    fps: float = VIDEO_FPS
    start_s: float = 0.0
    frames_start_s: float = 0.0

    @property
    def duration_s(self) -> float:
        return self.audio.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class EnhanceResult:
    audio: np.ndarray
    latency_s: float
    enhanced: bool


def effective_latency(spec: EnhancerSpec, window_s: float) -> float:
    """Seconds one run takes: t_a scaled by window/reference for emulated tiers, t_a otherwise."""
    if spec.kind == "emulated":
        return spec.t_a * window_s / spec.reference_s
    return spec.t_a


def _padded_stft(audio: np.ndarray, sample_rate: int) -> tuple[Spectrogram, int]:
    """Zero-pad by one FFT on both sides so every original sample is interior."""
    pad_tail = FFT_SIZE + (-(audio.size + FFT_SIZE) % HOP_SIZE)
    padded = np.pad(audio, (FFT_SIZE, pad_tail))
    return stft(Signal(padded, sample_rate), FFT_SIZE, HOP_SIZE), audio.size


def _resynth(spec: Spectrogram, gain: np.ndarray, length: int) -> np.ndarray:
    out = istft(spec.with_values(spec.values * gain)).samples
    return out[FFT_SIZE: FFT_SIZE + length]


def _oracle(window: MediaWindow, clean: Optional[np.ndarray]) -> np.ndarray:
    if clean is None:
        raise InvalidInput("oracle_mask needs the clean reference for the window")
    clean = np.asarray(clean, dtype=np.float64)
    if clean.shape != window.audio.shape:
        raise InvalidInput(f"Clean reference has {clean.size} samples, window {window.audio.size}")
    mix_spec, n = _padded_stft(window.audio, window.sample_rate)
    clean_spec, _ = _padded_stft(clean, window.sample_rate)
    return _resynth(mix_spec, oracle_mask(clean_spec, mix_spec).data[:, :, 0], n)


def _spectral(window: MediaWindow, oversubtraction: float) -> np.ndarray:
    spec, n = _padded_stft(window.audio, window.sample_rate)
    gain = subtraction_gain(spec, estimate_noise_profile(spec), oversubtraction)
    return _resynth(spec, gain, n)


def _visual_gated(window: MediaWindow, oversubtraction: float) -> np.ndarray:
    if len(window.frames) < 2 or window.roi is None:
        raise InsufficientInput("visual_gated needs at least two frames and a mouth ROI")
    spec, n = _padded_stft(window.audio, window.sample_rate)
    audio_map = audio_features(spec)
    video_map = visual_features(
        window.frames,
        window.roi,
        audio_frames=spec.n_frames,
        hop=HOP_SIZE,
        fft_size=FFT_SIZE,
        sample_rate=window.sample_rate,
        fps=window.fps,
        offset_s=window.start_s - window.frames_start_s - FFT_SIZE / window.sample_rate,
    )
    fused = concat_fuse(audio_map, broadcast_to(video_map, audio_map.shape))
    _, video = split_fused(fused)
    activity = video.data[:, 0, 0]
    hold = max(1, int(round(ACTIVITY_HOLD_FRAMES * window.sample_rate / (window.fps * HOP_SIZE))))
    activity = maximum_filter1d(activity, size=hold)
    peak = activity.max()
    if peak > 0:
        activity = activity / peak
    visual_gain = VISUAL_GAIN_FLOOR + (1.0 - VISUAL_GAIN_FLOOR) * activity
    gain = subtraction_gain(spec, estimate_noise_profile(spec), oversubtraction) * visual_gain[:, np.newaxis]
    return _resynth(spec, gain, n)


BACKENDS = {
    "oracle_mask": lambda w, spec, clean: _oracle(w, clean),
    "spectral_subtraction": lambda w, spec, clean: _spectral(w, spec.oversubtraction),
    "visual_gated": lambda w, spec, clean: _visual_gated(w, spec.oversubtraction),
}


def enhance(
    window: MediaWindow,
    spec: EnhancerSpec,
    oracle_ctx: Optional[np.ndarray] = None,
    clock: Union[SimClock, WallClock, None] = None,
) -> EnhanceResult:
    """
    Run one enhancement over a media window.

    Args:
        window: Buffered audio and frames
        spec: Enhancer selection and latency model
        oracle_ctx: Clean reference samples aligned with window.audio
        clock: SimClock to advance, or WallClock to busy-wait on, by the
            emulated latency

    Returns:
        EnhanceResult with audio of the window's length

    Raises:
        InsufficientInput: If the window is shorter than spec.t_i
    """
    audio = np.asarray(window.audio, dtype=np.float64)
    if spec.kind != "passthrough" and window.duration_s + WINDOW_TOLERANCE_S < spec.t_i:
        raise InsufficientInput(f"Window of {window.duration_s:.3f}s is shorter than t_i={spec.t_i}s")

    latency = effective_latency(spec, window.duration_s)
    backend = spec.backend if spec.kind == "emulated" else spec.kind
    if backend == "passthrough" or audio.size == 0:
        out = window.audio
    else:
        if audio.size < 2:
            raise InsufficientInput("Window too short to analyse")
        out = BACKENDS[backend](window, spec, oracle_ctx)

    if isinstance(clock, SimClock):
        clock.advance(to_us(latency))
    elif isinstance(clock, WallClock) and spec.kind == "emulated":
        clock.busy_wait(to_us(latency))
    logger.debug(f"enhance kind={spec.kind} backend={backend} window={window.duration_s:.3f}s latency={latency:.3f}s")
    return EnhanceResult(out, latency, spec.kind != "passthrough")
