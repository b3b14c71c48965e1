"""
Short-time Fourier analysis and overlap-add synthesis.

Analysis and synthesis both use a periodic square-root Hann window, so at
50% overlap the pair reconstructs interior samples exactly.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import irfft, rfft
from scipy.signal import get_window

from src.config.constants import FFT_SIZE, HOP_SIZE, SAMPLE_RATE
from src.scene.signals import Signal
from src.utils.errors import InvalidInput

WINDOW_NAME = "sqrt_hann"


@lru_cache(maxsize=8)
def analysis_window(length: int) -> np.ndarray:
    window = np.sqrt(get_window("hann", length, fftbins=True))
    window.setflags(write=False)
    return window


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    Complex STFT values, frames x bins.

    ``n_samples`` records the analysed length so synthesis can restore it.
    """
    values: np.ndarray
    fft_size: int = FFT_SIZE
    hop: int = HOP_SIZE
    window: str = WINDOW_NAME
    window_length: int = FFT_SIZE
    n_samples: int = 0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InvalidInput("Spectrogram values must be frames x bins")
        if values.shape[1] != self.fft_size // 2 + 1:
            raise InvalidInput(f"Expected {self.fft_size // 2 + 1} bins, got {values.shape[1]}")
        if not 0 < self.hop <= self.window_length:
            raise InvalidInput("hop must be positive and no longer than the window")
        object.__setattr__(self, "values", values.astype(np.complex128, copy=False))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        return Spectrogram(values, self.fft_size, self.hop, self.window, self.window_length,
                           self.n_samples, self.sample_rate)


def stft(signal: Union[Signal, np.ndarray], fft_size: int = FFT_SIZE, hop: int = HOP_SIZE) -> Spectrogram:
    """
    Analyse a signal into frames of fft_size samples advanced by hop.

    Raises:
        InvalidInput: If the signal is shorter than one window
    """
    if isinstance(signal, Signal):
        x, sr = signal.samples, signal.sample_rate
    else:
        x, sr = np.asarray(signal, dtype=np.float64), SAMPLE_RATE
    if hop <= 0 or hop > fft_size:
        raise InvalidInput("hop must be in (0, fft_size]")
    if x.size < fft_size:
        raise InvalidInput(f"Signal of {x.size} samples is shorter than one {fft_size}-point window")
    n_frames = 1 + (x.size - fft_size) // hop
    frames = sliding_window_view(x, fft_size)[::hop][:n_frames] * analysis_window(fft_size)
    return Spectrogram(rfft(frames, axis=1), fft_size, hop, WINDOW_NAME, fft_size, x.size, sr)


def istft(spec: Spectrogram) -> Signal:
    """
    Overlap-add synthesis.

    Raises:
        InvalidInput: If the metadata cannot describe the values
    """
    if spec.window != WINDOW_NAME or spec.window_length != spec.fft_size:
        raise InvalidInput(f"Unsupported synthesis window {spec.window}/{spec.window_length}")
    window = analysis_window(spec.fft_size)
    span = (spec.n_frames - 1) * spec.hop + spec.fft_size if spec.n_frames else 0
    length = spec.n_samples or span
    if length < span:
        raise InvalidInput(f"n_samples={spec.n_samples} is shorter than the {span} samples the frames span")

    out = np.zeros(length)
    if spec.n_frames:
        frames = irfft(spec.values, n=spec.fft_size, axis=1) * window
        for i, frame in enumerate(frames):
            start = i * spec.hop
            out[start: start + spec.fft_size] += frame
        # unity for the default 50% overlap
        out *= spec.hop / float(np.sum(window ** 2))
    return Signal(out, spec.sample_rate)


def interior(x: np.ndarray, fft_size: int = FFT_SIZE) -> slice:
    """Samples covered by a full set of overlapping frames."""
    return slice(fft_size, max(fft_size, np.asarray(x).size - fft_size))
