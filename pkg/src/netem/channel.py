"""
Channel presets and delay draws.

Preset numbers are emulation fiction chosen to reproduce which access
networks sustain 40 ms chunks, not measurements. One-way delay is
propagation plus serialization plus a lognormal jitter term.
"""
import logging
from typing import Optional

import numpy as np
from pydantic import ValidationError

from src.config.constants import CHANNEL_PRESETS, JITTER_QUANTILE_SIGMAS, RTT_SAMPLES
from src.models.inputs import ChannelModel
from src.utils.errors import InvalidInput
from src.wire.framing import CONTROL_OVERHEAD

logger = logging.getLogger(__name__)

ACK_BYTES = CONTROL_OVERHEAD


def preset(name: str, **overrides) -> ChannelModel:
    """
    Named channel with optional field overrides.

    Raises:
        InvalidInput: Unknown preset name or invalid override
    """
    if name not in CHANNEL_PRESETS:
        raise InvalidInput(f"Unknown channel preset {name!r}; expected one of {sorted(CHANNEL_PRESETS)}")
    try:
        return ChannelModel(preset=name, **overrides)
    except ValidationError as e:
        raise InvalidInput(f"Invalid override for preset {name!r}: {e}") from e


def jitter_sample(ch: ChannelModel, rng: np.random.Generator) -> float:
    """Lognormal jitter in ms with median ch.jitter_ms; no draw when jitter is off."""
    if ch.jitter_ms <= 0:
        return 0.0
    if ch.jitter_sigma <= 0:
        return ch.jitter_ms
    return float(rng.lognormal(np.log(ch.jitter_ms), ch.jitter_sigma))


def serialization_ms(ch: ChannelModel, size_bytes: int) -> float:
    return 8.0 * size_bytes / ch.bandwidth_bps * 1000.0


def one_way_delay(ch: ChannelModel, size_bytes: int, rng: np.random.Generator) -> float:
    """
    Delivery delay of one message in ms.

    Raises:
        InvalidInput: If size_bytes is negative
    """
    if size_bytes < 0:
        raise InvalidInput("size_bytes must be >= 0")
    return ch.base_one_way_ms + serialization_ms(ch, size_bytes) + jitter_sample(ch, rng)


def rtt(ch: ChannelModel, size_bytes: int, rng: np.random.Generator, reply_bytes: int = ACK_BYTES) -> float:
    """Upload of size_bytes plus the acknowledgement coming back, ms."""
    return one_way_delay(ch, size_bytes, rng) + one_way_delay(ch, reply_bytes, rng)


def rtt_experiment(
    ch: ChannelModel,
    size_bytes: int,
    n: int = RTT_SAMPLES,
    seed: Optional[int] = None,
) -> np.ndarray:
    """n independent round trips (ms) drawn from a seeded generator."""
    rng = np.random.default_rng(ch.seed if seed is None else seed)
    return np.array([rtt(ch, size_bytes, rng) for _ in range(n)])


def expected_t_comm(ch: ChannelModel, size_bytes: int, seed: Optional[int] = None) -> float:
    """Median round trip in seconds over a standard experiment."""
    return float(np.median(rtt_experiment(ch, size_bytes, seed=seed))) / 1000.0


def jitter_allowance(ch: ChannelModel) -> float:
    """Seconds of slack covering jitter up to a high lognormal quantile."""
    if ch.jitter_ms <= 0:
        return 0.0
    return ch.jitter_ms * float(np.exp(JITTER_QUANTILE_SIGMAS * ch.jitter_sigma)) / 1000.0


def is_lost(ch: ChannelModel, rng: np.random.Generator) -> bool:
    return ch.loss_rate > 0 and bool(rng.random() < ch.loss_rate)
