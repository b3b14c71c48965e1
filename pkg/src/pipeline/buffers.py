"""
Server-side input and output buffers.

The input buffer is a contiguous sample store indexed by media position,
with one (possibly cropped) frame per chunk. The output buffer assembles
processed audio per chunk from the pieces that enhancement windows and the
startup bypass deliver.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.utils.errors import InvalidInput
from src.wire.types import VideoFrame


@dataclass(frozen=True)
class BufferState:
    """Seconds of media waiting in each buffer."""
    input_buffer: float
    output_buffer: float

    def __post_init__(self):
        if self.input_buffer < 0 or self.output_buffer < 0:
            raise InvalidInput("Buffer levels cannot be negative")


class InputBuffer:
    """
    Preprocessed media in arrival order.

    Positions are absolute media samples; whole chunks below ``base`` have
    been evicted and can no longer be read.
    """

    def __init__(self, chunk_samples: int, sample_rate: int):
        self.chunk_samples = chunk_samples
        self.sample_rate = sample_rate
        self._audio = np.zeros(chunk_samples * 256)
        self._frames: list[Optional[VideoFrame]] = []
        self._last_frame: Optional[VideoFrame] = None
        self._count = 0
        self.base = 0
        self.consumed = 0

    @property
    def n_chunks(self) -> int:
        return self._count

    @property
    def written(self) -> int:
        return self._count * self.chunk_samples

    @property
    def retained(self) -> int:
        """Samples still held in memory."""
        return self.written - self.base

    def append(self, seq: int, audio: np.ndarray, frame: Optional[VideoFrame]) -> None:
        if seq != self._count:
            raise InvalidInput(f"Input buffer expects chunk {self._count}, got {seq}")
        if audio.size != self.chunk_samples:
            raise InvalidInput(f"Chunk {seq} has {audio.size} samples, expected {self.chunk_samples}")
        start = self.retained
        end = start + self.chunk_samples
        if end > self._audio.size:
            self._audio = np.concatenate([self._audio, np.zeros(max(self._audio.size, end - self._audio.size))])
        self._audio[start:end] = audio
        self._frames.append(frame)
        self._last_frame = frame
        self._count += 1

    def conceal(self, seq: int) -> None:
        """Silence plus the previous frame in place of a lost chunk."""
        self.append(seq, np.zeros(self.chunk_samples), self._last_frame)

    def audio(self, lo: int, hi: int) -> np.ndarray:
        if hi > self.written or lo < self.base:
            raise InvalidInput(f"Samples [{lo}, {hi}) not buffered (have [{self.base}, {self.written}))")
        return self._audio[lo - self.base: hi - self.base].copy()

    def frames(self, lo: int, hi: int) -> list[VideoFrame]:
        """Frames of every chunk overlapping samples [lo, hi)."""
        offset = self.base // self.chunk_samples
        first = max(lo // self.chunk_samples - offset, 0)
        last = (hi - 1) // self.chunk_samples - offset
        return [f for f in self._frames[first: last + 1] if f is not None]

    def evict_before(self, sample: int) -> None:
        """Drop the whole chunks that end at or before media position sample."""
        n = (min(sample, self.written) - self.base) // self.chunk_samples
        if n <= 0:
            return
        drop = n * self.chunk_samples
        keep = self.retained - drop
        self._audio[:keep] = self._audio[drop: drop + keep]
        del self._frames[:n]
        self.base += drop

    def consume_to(self, sample: int) -> None:
        self.consumed = max(self.consumed, min(sample, self.written))

    @property
    def buffered_s(self) -> float:
        return (self.written - self.consumed) / self.sample_rate


@dataclass
class OutputChunk:
    """Processed audio for one chunk and where it came from."""
    seq: int
    audio: np.ndarray
    covered: int = 0
    ready_us: int = 0
    enhance_start_us: Optional[int] = None
    enhance_done_us: Optional[int] = None
    enhanced: bool = False


@dataclass
class OutputBuffer:
    chunk_samples: int
    sample_rate: int
    chunks: dict[int, OutputChunk] = field(default_factory=dict)

    def write(
        self,
        lo: int,
        samples: np.ndarray,
        ready_us: int,
        window: Optional[tuple[int, int]] = None,
    ) -> None:
        """
        Deliver samples starting at media position lo.

        Args:
            window: (start_us, done_us) of the producing enhancement run, or
                None for bypassed audio
        """
        cs = self.chunk_samples
        pos, end = lo, lo + samples.size
        while pos < end:
            seq = pos // cs
            stop = min(end, (seq + 1) * cs)
            chunk = self.chunks.setdefault(seq, OutputChunk(seq, np.zeros(cs)))
            chunk.audio[pos - seq * cs: stop - seq * cs] = samples[pos - lo: stop - lo]
            chunk.covered += stop - pos
            chunk.ready_us = max(chunk.ready_us, ready_us)
            if window is not None:
                chunk.enhanced = True
                if chunk.enhance_start_us is None or window[0] >= chunk.enhance_start_us:
                    chunk.enhance_start_us, chunk.enhance_done_us = window
            pos = stop

    def complete(self, seq: int) -> Optional[OutputChunk]:
        chunk = self.chunks.get(seq)
        if chunk is None or chunk.covered < self.chunk_samples:
            return None
        return chunk

    def pop(self, seq: int) -> OutputChunk:
        return self.chunks.pop(seq)

    def discard(self, seq: int) -> None:
        self.chunks.pop(seq, None)

    @property
    def buffered_s(self) -> float:
        ready = sum(1 for c in self.chunks.values() if c.covered >= self.chunk_samples)
        return ready * self.chunk_samples / self.sample_rate
