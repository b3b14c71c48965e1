"""
Quality-factor frame codec.

8x8 block DCT, IJG luminance table scaled by quality, zigzag scan and a
run-length stream of variable-length integers. Layout:

  "BQ" | width u16 | height u16 | quality u8 | records... | trailing_empty varint

Each record encodes one non-empty block preceded by the number of empty
blocks (zero DC difference, all-zero AC) since the previous record:

  varint(empty_run) svarint(dc_diff) varint(n_pairs) n_pairs x [varint(zero_run) svarint(value)]
"""
import logging
import struct
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn

from src.config.constants import MAX_PAYLOAD_BYTES
from src.utils.errors import CodecError, InvalidInput
from src.wire.types import VideoFrame

logger = logging.getLogger(__name__)

CODEC_MAGIC = b"BQ"
CODEC_HEADER = struct.Struct(">2sHHB")
BLOCK = 8
MAX_COEFFICIENT = 1 << 16

LUMINANCE_TABLE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64).reshape(BLOCK, BLOCK)


def _zigzag_order() -> np.ndarray:
    cells = [(r, c) for r in range(BLOCK) for c in range(BLOCK)]
    cells.sort(key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1]))
    return np.array([r * BLOCK + c for r, c in cells], dtype=np.int64)


ZIGZAG = _zigzag_order()
UNZIGZAG = np.argsort(ZIGZAG)


@lru_cache(maxsize=100)
def quantization_table(quality: int) -> np.ndarray:
    """IJG-style scaling: 5000/q below 50, 200 - 2q from 50 up."""
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = np.clip((LUMINANCE_TABLE * scale + 50) // 100, 1, 255)
    table.setflags(write=False)
    return table


# ===========================================
# VARINTS
# ===========================================

def _put_varint(out: bytearray, value: int) -> None:
    while value >= 0x80:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)


def _put_svarint(out: bytearray, value: int) -> None:
    _put_varint(out, (value << 1) if value >= 0 else ((-value << 1) - 1))


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.pos = offset

    def varint(self) -> int:
        shift = result = 0
        while True:
            if self.pos >= len(self.data):
                raise CodecError("truncated stream")
            byte = self.data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise CodecError("varint too long")

    def svarint(self) -> int:
        raw = self.varint()
        return self._bounded((raw >> 1) if not raw & 1 else -((raw + 1) >> 1))

    @staticmethod
    def _bounded(value: int) -> int:
        if abs(value) > MAX_COEFFICIENT:
            raise CodecError("coefficient out of range")
        return value


# ===========================================
# BLOCK TRANSFORM
# ===========================================

def _to_blocks(pixels: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w = pixels.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    padded = np.pad(pixels.astype(np.float64), ((0, ph), (0, pw)), mode="edge") - 128.0
    rows, cols = padded.shape[0] // BLOCK, padded.shape[1] // BLOCK
    blocks = padded.reshape(rows, BLOCK, cols, BLOCK).transpose(0, 2, 1, 3)
    return blocks, rows, cols


def _from_blocks(blocks: np.ndarray, rows: int, cols: int, width: int, height: int) -> np.ndarray:
    image = blocks.reshape(rows, cols, BLOCK, BLOCK).transpose(0, 2, 1, 3).reshape(rows * BLOCK, cols * BLOCK)
    return np.clip(np.rint(image[:height, :width] + 128.0), 0, 255).astype(np.uint8)


def read_header(data: bytes) -> tuple[int, int, int]:
    """
    Parse the codec header.

    Returns:
        (width, height, quality)
    """
    if len(data) < CODEC_HEADER.size:
        raise CodecError("stream shorter than header")
    magic, width, height, quality = CODEC_HEADER.unpack_from(data, 0)
    if magic != CODEC_MAGIC:
        raise CodecError("bad codec magic")
    if width == 0 or height == 0 or not 1 <= quality <= 100:
        raise CodecError("invalid header fields")
    return width, height, quality


def compress_frame(frame: VideoFrame, quality: int) -> bytes:
    """
    Compress a grayscale frame.

    Args:
        frame: Frame to encode
        quality: 1 (smallest) to 100 (near-lossless)

    Returns:
        Self-describing compressed stream
    """
    if isinstance(quality, bool) or not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise InvalidInput(f"quality must be an integer in [1, 100], got {quality!r}")
    quality = int(quality)
    blocks, rows, cols = _to_blocks(frame.pixels)
    coeffs = dctn(blocks, axes=(2, 3), norm="ortho")
    quantized = np.rint(coeffs / quantization_table(quality)).astype(np.int64)
    flat = quantized.reshape(rows * cols, BLOCK * BLOCK)[:, ZIGZAG]

    dc = flat[:, 0]
    dc_diff = np.diff(dc, prepend=0)
    ac = flat[:, 1:]
    empty = (dc_diff == 0) & ~ac.any(axis=1)

    out = bytearray(CODEC_HEADER.pack(CODEC_MAGIC, frame.width, frame.height, quality))
    next_index = 0
    for index in np.flatnonzero(~empty):
        index = int(index)
        _put_varint(out, index - next_index)
        _put_svarint(out, int(dc_diff[index]))
        nz = np.flatnonzero(ac[index])
        _put_varint(out, nz.size)
        prev = -1
        for pos in nz:
            _put_varint(out, int(pos) - prev - 1)
            _put_svarint(out, int(ac[index, pos]))
            prev = int(pos)
        next_index = index + 1
    _put_varint(out, rows * cols - next_index)
    return bytes(out)


def decompress_frame(data: bytes) -> VideoFrame:
    """
    Decode a stream produced by compress_frame.

    Raises:
        CodecError: On truncated or malformed input
    """
    width, height, quality = read_header(data)
    rows, cols = -(-height // BLOCK), -(-width // BLOCK)
    total = rows * cols
    # a raw frame of this size must itself fit in one message
    if total * BLOCK * BLOCK > MAX_PAYLOAD_BYTES:
        raise CodecError(f"{width}x{height} frame exceeds the {MAX_PAYLOAD_BYTES}-byte payload limit")
    reader = _Reader(data, CODEC_HEADER.size)

    # (start, dc) run boundaries and (block, index, value) AC entries; the
    # coefficient matrix is only allocated once the whole stream parses
    runs: list[tuple[int, int]] = []
    entries: list[tuple[int, int, int]] = []
    done = 0
    dc = 0
    while True:
        run = reader.varint()
        if done + run > total:
            raise CodecError("block run overflows the frame")
        runs.append((done, dc))
        done += run
        if done == total:
            break
        dc += reader.svarint()
        if abs(dc) > MAX_COEFFICIENT:
            raise CodecError("DC value out of range")
        runs.append((done, dc))
        n_pairs = reader.varint()
        pos = 0
        for _ in range(n_pairs):
            pos += reader.varint() + 1
            if pos >= BLOCK * BLOCK:
                raise CodecError("coefficient index out of range")
            entries.append((done, pos, reader.svarint()))
        done += 1
    if reader.pos != len(data):
        raise CodecError(f"{len(data) - reader.pos} trailing bytes after stream end")

    flat = np.zeros((total, BLOCK * BLOCK), dtype=np.int64)
    starts = [start for start, _ in runs] + [total]
    for (start, value), stop in zip(runs, starts[1:]):
        flat[start:stop, 0] = value
    if entries:
        block_idx, coeff_idx, values = zip(*entries)
        flat[list(block_idx), list(coeff_idx)] = values

    quantized = flat[:, UNZIGZAG].reshape(rows, cols, BLOCK, BLOCK)
    blocks = idctn(quantized * quantization_table(quality), axes=(2, 3), norm="ortho")
    return VideoFrame(width, height, _from_blocks(blocks, rows, cols, width, height))


@lru_cache(maxsize=256)
def compress_cached(frame_key: bytes, width: int, height: int, quality: int) -> bytes:
    """compress_frame keyed by raw pixel bytes, for frames that repeat across chunks."""
    return compress_frame(VideoFrame.from_bytes(width, height, frame_key), quality)


@lru_cache(maxsize=256)
def decompress_cached(data: bytes) -> VideoFrame:
    return decompress_frame(data)


def mean_abs_error(a: VideoFrame, b: VideoFrame) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise InvalidInput("Frames differ in size")
    return float(np.mean(np.abs(a.pixels.astype(np.int16) - b.pixels.astype(np.int16))))
