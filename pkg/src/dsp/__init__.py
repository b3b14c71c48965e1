from src.dsp.enhancers import EnhanceResult, MediaWindow, effective_latency, enhance
from src.dsp.features import FeatureMap, audio_features, concat_fuse, split_fused, visual_features
from src.dsp.masks import apply_mask, estimate_noise_profile, oracle_mask, spectral_subtraction
from src.dsp.params import count_parameters, parameter_bytes
from src.dsp.stft import Spectrogram, istft, stft

__all__ = [
    "EnhanceResult",
    "MediaWindow",
    "effective_latency",
    "enhance",
    "FeatureMap",
    "audio_features",
    "concat_fuse",
    "split_fused",
    "visual_features",
    "apply_mask",
    "estimate_noise_profile",
    "oracle_mask",
    "spectral_subtraction",
    "count_parameters",
    "parameter_bytes",
    "Spectrogram",
    "istft",
    "stft",
]
