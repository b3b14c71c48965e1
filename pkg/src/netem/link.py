"""
One direction of an emulated link.

``DirectionLink`` turns a send time and a message size into an arrival time
(or a loss) and keeps per-direction FIFO order. ``EmulatedLink`` applies the
same model to a live asyncio stream by holding each write until its arrival
time.
"""
import asyncio
import logging
from typing import Optional

import numpy as np

from src.models.inputs import ChannelModel
from src.netem.channel import is_lost, one_way_delay
from src.utils.clock import WallClock, to_us

logger = logging.getLogger(__name__)

FORWARD = 0
REVERSE = 1


class DirectionLink:
    """
    Delay model for one direction with its own RNG stream.

    Args:
        channel: Link characteristics
        direction: FORWARD or REVERSE; mixed into the seed
    """

    def __init__(self, channel: ChannelModel, direction: int):
        self.channel = channel
        self.direction = direction
        self._rng = np.random.default_rng([channel.seed, direction])
        self._last_arrival_us = 0
        self.sent = 0
        self.lost = 0
        self.bytes_sent = 0

    def transmit(self, send_us: int, size_bytes: int, droppable: bool = True) -> Optional[int]:
        """
        Arrival time in microseconds, or None if the message is lost.

        Arrivals never overtake earlier messages on the same direction.
        """
        self.sent += 1
        self.bytes_sent += size_bytes
        if droppable and is_lost(self.channel, self._rng):
            self.lost += 1
            return None
        drawn = send_us + to_us(one_way_delay(self.channel, size_bytes, self._rng) / 1000.0)
        arrival = max(drawn, self._last_arrival_us)
        self._last_arrival_us = arrival
        return arrival


class EmulatedLink:
    """
    Delays writes to an asyncio stream according to a DirectionLink.

    A single pump task writes queued messages at their arrival times so
    order is preserved.
    """

    def __init__(self, writer: asyncio.StreamWriter, channel: ChannelModel, direction: int, clock: WallClock,
                 label: str = "link"):
        self._writer = writer
        self._link = DirectionLink(channel, direction)
        self._clock = clock
        self._queue: asyncio.Queue = asyncio.Queue()
        self._pump: Optional[asyncio.Task] = None
        self.label = label

    @property
    def lost(self) -> int:
        return self._link.lost

    def start(self) -> None:
        if self._pump is None:
            self._pump = asyncio.create_task(self._run(), name=f"{self.label}-pump")

    def send(self, data: bytes, droppable: bool = True) -> Optional[int]:
        """Queue data; returns the scheduled arrival time or None if dropped."""
        arrival = self._link.transmit(self._clock.now_us(), len(data), droppable)
        if arrival is None:
            logger.debug(f"[{self.label}] dropped {len(data)} bytes")
            return None
        self._queue.put_nowait((arrival, data))
        return arrival

    async def _run(self) -> None:
        while True:
            arrival, data = await self._queue.get()
            if data is None:
                break
            await self._clock.sleep_until(arrival)
            self._writer.write(data)
            await self._writer.drain()

    async def close(self) -> None:
        """Flush pending writes, then close the stream."""
        if self._pump is not None:
            self._queue.put_nowait((0, None))
            try:
                await self._pump
            except (ConnectionError, asyncio.CancelledError):
                pass
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except ConnectionError:
            pass
