"""
Signals, impulse responses and the acoustic mixture model.

A scene holds dry sources with split impulse responses plus additive noise
tracks. The observed mixture is the sum of every source convolved with its
early response (the clean targets) and an interference term made of every
source convolved with its late response plus all noise tracks.
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.signal import convolve as _sp_convolve

from src.config.constants import SAMPLE_RATE
from src.utils.errors import InvalidInput, UndefinedMetric

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True, eq=False)
class Signal:
    """Mono real-valued signal, nominal range [-1, 1]."""
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidInput(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInput("Signal samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("Signal samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def padded(self, length: int) -> "Signal":
        if length <= self.samples.size:
            return self
        return Signal(np.pad(self.samples, (0, length - self.samples.size)), self.sample_rate)

    def scaled(self, factor: float) -> "Signal":
        return Signal(self.samples * factor, self.sample_rate)


@dataclass(frozen=True, eq=False)
class ImpulseResponsePair:
    """Early (direct + early reflections) and late (reverberant tail) responses."""
    early: np.ndarray
    late: np.ndarray
    boundary_index: int

    def __post_init__(self):
        early = np.asarray(self.early, dtype=np.float64)
        late = np.asarray(self.late, dtype=np.float64)
        if early.ndim != 1 or late.ndim != 1:
            raise InvalidInput("Impulse responses must be one-dimensional")
        if early.size == 0 or late.size == 0:
            raise InvalidInput("Impulse responses must be non-empty")
        if not (np.all(np.isfinite(early)) and np.all(np.isfinite(late))):
            raise InvalidInput("Impulse responses must be finite")
        if self.boundary_index < 0:
            raise InvalidInput("boundary_index must be non-negative")
        if np.any(early[self.boundary_index:] != 0):
            raise InvalidInput("Early response has taps at or after the boundary")
        if np.any(late[: self.boundary_index] != 0):
            raise InvalidInput("Late response has taps before the boundary")
        object.__setattr__(self, "early", early)
        object.__setattr__(self, "late", late)

    @classmethod
    def split(cls, response: ArrayLike, boundary_index: int) -> "ImpulseResponsePair":
        """Cut one full response at boundary_index."""
        h = np.asarray(response, dtype=np.float64)
        early = h.copy()
        early[boundary_index:] = 0.0
        late = h.copy()
        late[:boundary_index] = 0.0
        return cls(early, late, boundary_index)

    @classmethod
    def identity(cls) -> "ImpulseResponsePair":
        return cls(np.array([1.0, 0.0]), np.array([0.0, 0.0]), 1)

    def scaled_late(self, factor: float) -> "ImpulseResponsePair":
        return ImpulseResponsePair(self.early, self.late * factor, self.boundary_index)


@dataclass(frozen=True, eq=False)
class AcousticScene:
    """Targets with their responses, noise tracks and the synthesis seed."""
    sources: list[tuple[Signal, ImpulseResponsePair]]
    noises: list[Signal] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if len(self.sources) < 1:
            raise InvalidInput("A scene needs at least one target source")
        if self.seed < 0:
            raise InvalidInput("seed must be unsigned")

    @property
    def sample_rate(self) -> int:
        rates = {s.sample_rate for s, _ in self.sources} | {n.sample_rate for n in self.noises}
        if len(rates) != 1:
            raise InvalidInput(f"Scene signals use mixed sample rates {sorted(rates)}")
        return rates.pop()

    @property
    def length(self) -> int:
        return max([len(s) for s, _ in self.sources] + [len(n) for n in self.noises])


# ===========================================
# OPERATIONS
# ===========================================

def convolve(x: Union[Signal, ArrayLike], h: ArrayLike, full: bool = False) -> Signal:
    """
    Linear convolution.

    Args:
        x: Input signal (a bare array is taken at the default sample rate)
        h: Filter coefficients
        full: Return len(x) + len(h) - 1 samples instead of truncating to len(x)

    Raises:
        InvalidInput: If either input is empty
    """
    signal = x if isinstance(x, Signal) else Signal(np.asarray(x, dtype=np.float64))
    taps = np.asarray(h, dtype=np.float64)
    if len(signal) == 0 or taps.size == 0:
        raise InvalidInput("convolve needs non-empty x and h")
    y = _sp_convolve(signal.samples, taps, mode="full", method="auto")
    if not full:
        y = y[: len(signal)]
    return Signal(y, signal.sample_rate)


def render_clean(source: Signal, ir: ImpulseResponsePair) -> Signal:
    """The target as heard: source filtered by its early response."""
    return convolve(source, ir.early)


def render_interference(scene: AcousticScene) -> Signal:
    """Late reverberation of every source plus every noise track, aligned at k=0."""
    sr = scene.sample_rate
    total = np.zeros(scene.length)
    for source, ir in scene.sources:
        tail = convolve(source, ir.late).samples
        total[: tail.size] += tail
    for noise in scene.noises:
        total[: len(noise)] += noise.samples
    return Signal(total, sr)


def mix(scene: AcousticScene) -> tuple[Signal, list[Signal], Signal]:
    """
    Observed mixture of a scene.

    Returns:
        (mixture, clean references padded to the scene length, interference)
    """
    sr = scene.sample_rate
    n = scene.length
    clean_refs = [render_clean(source, ir).padded(n) for source, ir in scene.sources]
    interference = render_interference(scene)
    mixture = interference.samples.copy()
    for ref in clean_refs:
        mixture += ref.samples
    return Signal(mixture, sr), clean_refs, interference


def clean_sum(refs: list[Signal]) -> Signal:
    total = np.zeros(max(len(r) for r in refs))
    for ref in refs:
        total[: len(ref)] += ref.samples
    return Signal(total, refs[0].sample_rate)


def _samples(value: Union[Signal, ArrayLike]) -> np.ndarray:
    return value.samples if isinstance(value, Signal) else np.asarray(value, dtype=np.float64)


def snr_db(reference: Union[Signal, ArrayLike], test: Union[Signal, ArrayLike]) -> float:
    """
    Signal-to-noise ratio of test against reference, in dB.

    Returns:
        10*log10(sum(ref^2) / sum((ref - test)^2)), or +inf when test == reference

    Raises:
        InvalidInput: On length mismatch
        UndefinedMetric: If the reference is all zeros
    """
    ref = _samples(reference)
    tst = _samples(test)
    if ref.shape != tst.shape:
        raise InvalidInput(f"snr_db needs equal lengths, got {ref.size} and {tst.size}")
    power = float(np.sum(ref * ref))
    if power == 0.0:
        raise UndefinedMetric("SNR is undefined for an all-zero reference")
    error = float(np.sum((ref - tst) ** 2))
    if error == 0.0:
        return float("inf")
    return 10.0 * np.log10(power / error)
