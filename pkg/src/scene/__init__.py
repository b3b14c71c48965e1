from src.scene.signals import (
    AcousticScene,
    ImpulseResponsePair,
    Signal,
    clean_sum,
    convolve,
    mix,
    render_clean,
    render_interference,
    snr_db,
)
from src.scene.synth import synth_scene

__all__ = [
    "AcousticScene",
    "ImpulseResponsePair",
    "Signal",
    "clean_sum",
    "convolve",
    "mix",
    "render_clean",
    "render_interference",
    "snr_db",
    "synth_scene",
]
