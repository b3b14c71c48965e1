"""
Time-frequency masks: the oracle Wiener-like mask, mask application and
magnitude spectral subtraction with a blind noise-profile estimate.
"""
import logging
from typing import Optional, Union

import numpy as np

from src.config.constants import MASK_EPSILON, NOISE_PROFILE_QUANTILE, OVERSUBTRACTION, SPECTRAL_FLOOR
from src.dsp.features import FeatureMap
from src.dsp.stft import Spectrogram, istft, stft
from src.scene.signals import Signal
from src.utils.errors import InvalidInput, ShapeError

logger = logging.getLogger(__name__)


def oracle_mask(clean: Spectrogram, mixture: Spectrogram) -> FeatureMap:
    """
    |X|^2 / (|X|^2 + |Y - X|^2 + eps), entries in [0, 1].

    Raises:
        ShapeError: If the spectrograms differ in shape
    """
    if clean.shape != mixture.shape:
        raise ShapeError(f"Clean {clean.shape} and mixture {mixture.shape} differ")
    target = np.abs(clean.values) ** 2
    residual = np.abs(mixture.values - clean.values) ** 2
    return FeatureMap(target / (target + residual + MASK_EPSILON))


def _mask_array(mask: Union[FeatureMap, np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    data = mask.data if isinstance(mask, FeatureMap) else np.asarray(mask, dtype=np.float64)
    if data.ndim == 3:
        if data.shape[2] != 1:
            raise ShapeError("A mask has a single channel")
        data = data[:, :, 0]
    if data.shape != shape:
        raise ShapeError(f"Mask {data.shape} does not match spectrogram {shape}")
    if np.any(data < 0) or np.any(data > 1) or not np.all(np.isfinite(data)):
        raise InvalidInput("Mask entries must lie in [0, 1]")
    return data


def apply_mask(mixture: Spectrogram, mask: Union[FeatureMap, np.ndarray]) -> Signal:
    """Resynthesize mask * mixture."""
    return istft(mixture.with_values(mixture.values * _mask_array(mask, mixture.shape)))


def estimate_noise_profile(mixture: Spectrogram, quantile: float = NOISE_PROFILE_QUANTILE) -> Spectrogram:
    """
    Blind noise profile: the quietest fraction of frames.

    Speech leaves pauses, so the lowest-energy frames are close to noise-only.
    """
    if not 0 < quantile <= 1:
        raise InvalidInput("quantile must be in (0, 1]")
    energy = np.sum(np.abs(mixture.values) ** 2, axis=1)
    count = max(1, int(np.ceil(quantile * mixture.n_frames)))
    quietest = np.sort(np.argsort(energy, kind="stable")[:count])
    return mixture.with_values(mixture.values[quietest])


def subtraction_gain(
    mixture: Spectrogram,
    noise_profile: Spectrogram,
    oversubtraction: float = OVERSUBTRACTION,
) -> np.ndarray:
    """
    Real gain |S|/|Y| with |S| = max(|Y| - a*N, floor*|Y|).

    N is the per-bin mean magnitude of the profile.
    """
    if noise_profile.n_bins != mixture.n_bins:
        raise ShapeError(f"Noise profile has {noise_profile.n_bins} bins, mixture {mixture.n_bins}")
    noise = np.mean(noise_profile.magnitude, axis=0) if noise_profile.n_frames else np.zeros(mixture.n_bins)
    magnitude = mixture.magnitude
    cleaned = np.maximum(magnitude - oversubtraction * noise, SPECTRAL_FLOOR * magnitude)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(magnitude > 0, cleaned / magnitude, 1.0)
    return np.clip(gain, 0.0, 1.0)


def spectral_subtraction(
    mixture: Signal,
    noise_profile: Optional[Spectrogram],
    oversubtraction: float = OVERSUBTRACTION,
) -> Signal:
    """
    Magnitude spectral subtraction with the mixture phase.

    Raises:
        InvalidInput: If no noise profile is given
    """
    if noise_profile is None:
        raise InvalidInput("spectral_subtraction needs a noise profile")
    spec = stft(mixture, noise_profile.fft_size, noise_profile.hop)
    return apply_mask(spec, subtraction_gain(spec, noise_profile, oversubtraction))
