"""
SNR-based enhancement quality.
"""
from typing import Union

import numpy as np

from src.models.outputs import QualityReport
from src.scene.signals import Signal, snr_db
from src.utils.errors import InvalidInput

SignalLike = Union[Signal, np.ndarray]


def _array(x: SignalLike) -> np.ndarray:
    return x.samples if isinstance(x, Signal) else np.asarray(x, dtype=np.float64)


def quality(clean: SignalLike, noisy: SignalLike, enhanced: SignalLike) -> QualityReport:
    """
    Input SNR, output SNR and their difference, in dB.

    Raises:
        InvalidInput: If the three signals differ in length
        UndefinedMetric: If clean is all zeros
    """
    c, n, e = _array(clean), _array(noisy), _array(enhanced)
    if not c.shape == n.shape == e.shape:
        raise InvalidInput(f"quality needs equal lengths, got {c.size}, {n.size}, {e.size}")
    input_snr = snr_db(c, n)
    output_snr = snr_db(c, e)
    if np.isinf(input_snr) and np.isinf(output_snr):
        improvement = 0.0
    else:
        improvement = output_snr - input_snr
    return QualityReport(input_snr=input_snr, output_snr=output_snr, snr_improvement=improvement)
