"""
Clocks shared by the simulator, the live service and the emulated enhancer.

All times are integer microseconds so event ordering in simulation is exact.
"""
import asyncio
import time
from typing import Optional, Protocol

SPIN_MARGIN_US = 2000


def to_us(seconds: float) -> int:
    return int(round(seconds * 1e6))


def to_s(micros: int) -> float:
    return micros / 1e6


class Clock(Protocol):
    def now_us(self) -> int: ...


class SimClock:
    """Virtual clock advanced explicitly by the event loop or a caller."""

    def __init__(self, start_us: int = 0):
        self._now = start_us

    def now_us(self) -> int:
        return self._now

    def advance_to(self, t_us: int) -> None:
        if t_us < self._now:
            raise ValueError(f"Clock cannot move backwards ({t_us} < {self._now})")
        self._now = t_us

    def advance(self, dt_us: int) -> None:
        self.advance_to(self._now + dt_us)


class WallClock:
    """
    Wall clock in microseconds since ``origin_ns``.

    Client and server on one host share an origin (sent in HELLO), so their
    timestamps are directly comparable.
    """

    def __init__(self, origin_ns: Optional[int] = None):
        self.origin_ns = time.time_ns() if origin_ns is None else origin_ns

    def now_us(self) -> int:
        return (time.time_ns() - self.origin_ns) // 1000

    async def sleep_until(self, t_us: int) -> None:
        delay = t_us - self.now_us()
        if delay > 0:
            await asyncio.sleep(delay / 1e6)

    def busy_wait(self, dt_us: int) -> None:
        """Block the calling thread for dt_us: sleep most of it, spin the rest."""
        deadline = self.now_us() + dt_us
        remaining = deadline - self.now_us()
        if remaining > SPIN_MARGIN_US:
            time.sleep((remaining - SPIN_MARGIN_US) / 1e6)
        while self.now_us() < deadline:
            pass
