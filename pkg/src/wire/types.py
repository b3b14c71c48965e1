"""
Transport-level data types: frames, media chunks, enhanced audio and control messages.
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from src.config.constants import ControlCode, MessageType
from src.utils.errors import InvalidInput

U32_MAX = 2**32 - 1
U64_MAX = 2**64 - 1


@dataclass(frozen=True, eq=False)
class VideoFrame:
    """8-bit grayscale frame, row-major."""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 1:
            if pixels.size != self.width * self.height:
                raise InvalidInput(
                    f"Frame needs {self.width * self.height} pixels, got {pixels.size}"
                )
            pixels = pixels.reshape(self.height, self.width)
        if pixels.shape != (self.height, self.width):
            raise InvalidInput(f"Pixel array {pixels.shape} does not match {self.height}x{self.width}")
        if pixels.dtype != np.uint8:
            pixels = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "VideoFrame":
        return cls(width, height, np.frombuffer(data, dtype=np.uint8))

    def to_bytes(self) -> bytes:
        return np.ascontiguousarray(self.pixels).tobytes()

    def crop(self, x: int, y: int, width: int, height: int) -> "VideoFrame":
        if x + width > self.width or y + height > self.height:
            raise InvalidInput(f"Crop {width}x{height}+{x}+{y} outside {self.width}x{self.height} frame")
        return VideoFrame(width, height, self.pixels[y:y + height, x:x + width].copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VideoFrame):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None


def _as_pcm(audio) -> np.ndarray:
    arr = np.asarray(audio)
    if arr.ndim != 1:
        raise InvalidInput("Audio must be one-dimensional")
    if arr.dtype != np.int16:
        if not np.issubdtype(arr.dtype, np.integer) or arr.size and (arr.min() < -32768 or arr.max() > 32767):
            raise InvalidInput("Audio must be 16-bit PCM samples")
        arr = arr.astype(np.int16)
    return arr


def _check_u32(name: str, value: int) -> None:
    if not 0 <= value <= U32_MAX:
        raise InvalidInput(f"{name}={value} outside unsigned 32-bit range")


def _check_u64(name: str, value: int) -> None:
    if not 0 <= value <= U64_MAX:
        raise InvalidInput(f"{name}={value} outside unsigned 64-bit range")


@dataclass(frozen=True, eq=False)
class MediaChunk:
    """
    One t_chunk of audio plus its video frame.

    ``frame`` is a VideoFrame when raw, compressed bytes when ``compressed``
    is set, or None for audio-only chunks.
    """
    seq: int
    capture_ts_us: int
    audio: np.ndarray
    frame: Union[VideoFrame, bytes, None] = None
    compressed: bool = False
    quality: int = 100

    def __post_init__(self):
        _check_u32("seq", self.seq)
        _check_u64("capture_ts_us", self.capture_ts_us)
        object.__setattr__(self, "audio", _as_pcm(self.audio))
        if not 1 <= self.quality <= 100:
            raise InvalidInput(f"quality must be in [1, 100], got {self.quality}")
        if self.compressed and not isinstance(self.frame, (bytes, bytearray)):
            raise InvalidInput("Compressed chunks carry frame bytes")
        if not self.compressed and isinstance(self.frame, (bytes, bytearray)):
            raise InvalidInput("Raw chunks carry a VideoFrame")
        if isinstance(self.frame, bytearray):
            object.__setattr__(self, "frame", bytes(self.frame))

    @property
    def msg_type(self) -> MessageType:
        return MessageType.MEDIA_CHUNK

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MediaChunk):
            return NotImplemented
        return (
            self.seq == other.seq
            and self.capture_ts_us == other.capture_ts_us
            and np.array_equal(self.audio, other.audio)
            and self.frame == other.frame
            and self.compressed == other.compressed
            and self.quality == other.quality
        )

    __hash__ = None


@dataclass(frozen=True)
class ServerTimestamps:
    """Server-side event times in microseconds."""
    arrived: int = 0
    preprocessed: int = 0
    enhance_start: int = 0
    enhance_done: int = 0
    sent_back: int = 0

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.arrived, self.preprocessed, self.enhance_start, self.enhance_done, self.sent_back)


@dataclass(frozen=True, eq=False)
class EnhancedAudio:
    """Processed audio for one chunk, returned to the client."""
    seq: int
    audio: np.ndarray
    timestamps: ServerTimestamps = field(default_factory=ServerTimestamps)
    enhanced: bool = False
    concealed: bool = False   # stands in for a media chunk lost on the way up

    def __post_init__(self):
        _check_u32("seq", self.seq)
        for name, value in zip(("arrived", "preprocessed", "enhance_start", "enhance_done", "sent_back"),
                               self.timestamps.as_tuple()):
            _check_u64(name, value)
        object.__setattr__(self, "audio", _as_pcm(self.audio))

    @property
    def msg_type(self) -> MessageType:
        return MessageType.ENHANCED_AUDIO

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnhancedAudio):
            return NotImplemented
        return (
            self.seq == other.seq
            and self.timestamps == other.timestamps
            and self.enhanced == other.enhanced
            and self.concealed == other.concealed
            and np.array_equal(self.audio, other.audio)
        )

    __hash__ = None


@dataclass(frozen=True)
class Control:
    """HELLO / ACK / END_OF_STREAM / ERROR with optional UTF-8 text."""
    code: ControlCode
    seq: int = 0
    text: str = ""

    def __post_init__(self):
        _check_u32("seq", self.seq)
        object.__setattr__(self, "code", ControlCode(self.code))

    @property
    def msg_type(self) -> MessageType:
        return MessageType.CONTROL


Body = Union[MediaChunk, EnhancedAudio, Control]


@dataclass(frozen=True, eq=False)
class WireMessage:
    """A decoded message with its header fields."""
    msg_type: MessageType
    seq: int
    send_ts_us: int
    body: Body
    size: int


@dataclass(frozen=True)
class NeedMoreData:
    """Returned when the buffer holds only part of a message."""
    needed: int = 1
