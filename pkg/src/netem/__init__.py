from src.netem.channel import (
    expected_t_comm,
    jitter_allowance,
    one_way_delay,
    preset,
    rtt,
    rtt_experiment,
)
from src.netem.link import DirectionLink, EmulatedLink

__all__ = [
    "expected_t_comm",
    "jitter_allowance",
    "one_way_delay",
    "preset",
    "rtt",
    "rtt_experiment",
    "DirectionLink",
    "EmulatedLink",
]
