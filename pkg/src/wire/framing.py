"""
Message framing for the client/server stream.

Layout (all integers big-endian, see PROTOCOL.md):
  [magic "AVSE" 4][version 1][msg_type 1][seq u32][send_ts_us u64][payload_len u32][payload ...]

Version 2 is the same message with a CRC-32 of the header inserted before
the payload and a CRC-32 of the payload appended after it.
"""
import logging
import struct
import zlib
from typing import Optional, Union

import numpy as np

from src.config.constants import (
    MAX_PAYLOAD_BYTES,
    WIRE_MAGIC,
    WIRE_VERSION,
    WIRE_VERSION_CHECKSUMMED,
    ControlCode,
    MessageType,
)
from src.utils.errors import CodecError, InvalidInput, ProtocolError
from src.wire.codec import compress_frame, read_header
from src.wire.types import (
    Body,
    Control,
    EnhancedAudio,
    MediaChunk,
    NeedMoreData,
    ServerTimestamps,
    VideoFrame,
    WireMessage,
)

logger = logging.getLogger(__name__)

HEADER = struct.Struct(">4sBBIQI")
CRC = struct.Struct(">I")
HEADER_SIZE = HEADER.size                      # 22
MEDIA_FIXED = struct.Struct(">QBBIHHI")         # 22
ENHANCED_FIXED = struct.Struct(">QQQQQBI")      # 45
CONTROL_FIXED = struct.Struct(">B")

FLAG_COMPRESSED = 0x01
FLAG_HAS_FRAME = 0x02
FLAG_ENHANCED = 0x01
FLAG_CONCEALED = 0x02

MEDIA_OVERHEAD = HEADER_SIZE + MEDIA_FIXED.size        # 44
ENHANCED_OVERHEAD = HEADER_SIZE + ENHANCED_FIXED.size
CONTROL_OVERHEAD = HEADER_SIZE + CONTROL_FIXED.size
CHECKSUM_OVERHEAD = 2 * CRC.size

Buffer = Union[bytes, bytearray, memoryview]


# ===========================================
# ENCODING
# ===========================================

def _media_payload(chunk: MediaChunk) -> bytes:
    flags = 0
    width = height = 0
    frame_bytes = b""
    if chunk.frame is not None:
        flags |= FLAG_HAS_FRAME
        if chunk.compressed:
            flags |= FLAG_COMPRESSED
            try:
                width, height, _ = read_header(chunk.frame)
            except CodecError as e:
                raise InvalidInput(f"Chunk {chunk.seq} carries an unreadable compressed frame: {e}") from e
            frame_bytes = chunk.frame
        else:
            width, height = chunk.frame.width, chunk.frame.height
            frame_bytes = chunk.frame.to_bytes()
    fixed = MEDIA_FIXED.pack(
        chunk.capture_ts_us, flags, chunk.quality, chunk.audio.size, width, height, len(frame_bytes)
    )
    return fixed + chunk.audio.astype(">i2").tobytes() + frame_bytes


def _enhanced_payload(msg: EnhancedAudio) -> bytes:
    fixed = ENHANCED_FIXED.pack(
        *msg.timestamps.as_tuple(),
        (FLAG_ENHANCED if msg.enhanced else 0) | (FLAG_CONCEALED if msg.concealed else 0),
        msg.audio.size,
    )
    return fixed + msg.audio.astype(">i2").tobytes()


def _control_payload(msg: Control) -> bytes:
    return CONTROL_FIXED.pack(int(msg.code)) + msg.text.encode("utf-8")


def encode_message(body: Body, send_ts_us: int = 0, checksums: bool = False) -> bytes:
    """
    Serialize a message body with its header.

    Args:
        body: MediaChunk, EnhancedAudio or Control
        send_ts_us: Sender clock at transmission, microseconds
        checksums: Emit version 2, with header and payload CRC-32s

    Returns:
        The complete framed message

    Raises:
        ProtocolError: If the payload exceeds 16 MiB
    """
    if isinstance(body, MediaChunk):
        payload = _media_payload(body)
    elif isinstance(body, EnhancedAudio):
        payload = _enhanced_payload(body)
    elif isinstance(body, Control):
        payload = _control_payload(body)
    else:
        raise InvalidInput(f"Cannot encode {type(body).__name__}")
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise ProtocolError(f"Payload of {len(payload)} bytes exceeds {MAX_PAYLOAD_BYTES}", skip=1)
    if not 0 <= send_ts_us < 2**64:
        raise InvalidInput(f"send_ts_us={send_ts_us} outside unsigned 64-bit range")
    version = WIRE_VERSION_CHECKSUMMED if checksums else WIRE_VERSION
    header = HEADER.pack(WIRE_MAGIC, version, int(body.msg_type), body.seq, send_ts_us, len(payload))
    if not checksums:
        return header + payload
    return b"".join((header, CRC.pack(zlib.crc32(header)), payload, CRC.pack(zlib.crc32(payload))))


def encode_chunk(chunk: MediaChunk, send_ts_us: int = 0, checksums: bool = False) -> bytes:
    return encode_message(chunk, send_ts_us, checksums)


# ===========================================
# DECODING
# ===========================================

def _resync_skip(buf: Buffer, start: int = 1) -> int:
    """Bytes to drop so the buffer starts at the next candidate magic."""
    idx = bytes(buf).find(WIRE_MAGIC, start) if isinstance(buf, memoryview) else buf.find(WIRE_MAGIC, start)
    if idx == -1:
        # keep a tail that could be the start of a magic
        return max(start, len(buf) - (len(WIRE_MAGIC) - 1))
    return idx


def _parse_media(seq: int, payload: bytes) -> MediaChunk:
    if len(payload) < MEDIA_FIXED.size:
        raise ValueError("media payload shorter than its fixed fields")
    capture_ts, flags, quality, count, width, height, frame_len = MEDIA_FIXED.unpack_from(payload, 0)
    if flags & ~(FLAG_COMPRESSED | FLAG_HAS_FRAME):
        raise ValueError(f"unknown media flags 0x{flags:02x}")
    audio_end = MEDIA_FIXED.size + 2 * count
    if audio_end + frame_len != len(payload):
        raise ValueError("media payload length disagrees with its fields")
    audio = np.frombuffer(payload, dtype=">i2", count=count, offset=MEDIA_FIXED.size).astype(np.int16)
    frame_bytes = payload[audio_end:]
    compressed = bool(flags & FLAG_COMPRESSED)
    frame: Optional[Union[VideoFrame, bytes]] = None
    if flags & FLAG_HAS_FRAME:
        if compressed:
            frame = frame_bytes
        else:
            if frame_len != width * height:
                raise ValueError("raw frame length disagrees with its dimensions")
            frame = VideoFrame.from_bytes(width, height, frame_bytes)
    elif compressed or frame_len or width or height:
        raise ValueError("frame fields set on an audio-only chunk")
    return MediaChunk(seq, capture_ts, audio, frame, compressed, quality)


def _parse_enhanced(seq: int, payload: bytes) -> EnhancedAudio:
    if len(payload) < ENHANCED_FIXED.size:
        raise ValueError("enhanced payload shorter than its fixed fields")
    *stamps, flags, count = ENHANCED_FIXED.unpack_from(payload, 0)
    if flags & ~(FLAG_ENHANCED | FLAG_CONCEALED):
        raise ValueError(f"unknown enhanced-audio flags 0x{flags:02x}")
    if ENHANCED_FIXED.size + 2 * count != len(payload):
        raise ValueError("enhanced payload length disagrees with sample count")
    audio = np.frombuffer(payload, dtype=">i2", count=count, offset=ENHANCED_FIXED.size).astype(np.int16)
    return EnhancedAudio(
        seq, audio, ServerTimestamps(*stamps), bool(flags & FLAG_ENHANCED), bool(flags & FLAG_CONCEALED)
    )


def _parse_control(seq: int, payload: bytes) -> Control:
    if len(payload) < CONTROL_FIXED.size:
        raise ValueError("empty control payload")
    (code,) = CONTROL_FIXED.unpack_from(payload, 0)
    return Control(ControlCode(code), seq, payload[CONTROL_FIXED.size:].decode("utf-8"))


PARSERS = {
    MessageType.MEDIA_CHUNK: _parse_media,
    MessageType.ENHANCED_AUDIO: _parse_enhanced,
    MessageType.CONTROL: _parse_control,
}


def decode_message(buf: Buffer) -> Union[WireMessage, NeedMoreData]:
    """
    Decode the message at the start of buf.

    Args:
        buf: Bytes received so far

    Returns:
        The decoded message (``size`` tells how many bytes it used), or
        NeedMoreData when buf holds only a prefix. Nothing is consumed.

    Raises:
        ProtocolError: On bad magic, version, type, length or (version 2) checksum;
            ``skip`` is the number of bytes to drop before retrying
    """
    n = len(buf)
    if n == 0:
        return NeedMoreData(HEADER_SIZE)
    head = bytes(buf[: len(WIRE_MAGIC)])
    if head != WIRE_MAGIC[: len(head)]:
        raise ProtocolError("bad magic", skip=_resync_skip(buf))
    if n < HEADER_SIZE:
        return NeedMoreData(HEADER_SIZE - n)

    _, version, msg_type, seq, send_ts, payload_len = HEADER.unpack_from(buf, 0)
    checksummed = version == WIRE_VERSION_CHECKSUMMED
    if version != WIRE_VERSION and not checksummed:
        raise ProtocolError(f"unsupported version {version}", skip=_resync_skip(buf))
    if msg_type not in PARSERS:
        raise ProtocolError(f"unknown message type {msg_type}", skip=_resync_skip(buf))
    if payload_len > MAX_PAYLOAD_BYTES:
        raise ProtocolError(f"payload length {payload_len} exceeds limit", skip=_resync_skip(buf))

    start = HEADER_SIZE
    if checksummed:
        start += CRC.size
        if n < start:
            return NeedMoreData(start - n)
        (header_crc,) = CRC.unpack_from(buf, HEADER_SIZE)
        if zlib.crc32(bytes(buf[:HEADER_SIZE])) != header_crc:
            raise ProtocolError("header checksum mismatch", skip=_resync_skip(buf))

    total = start + payload_len + (CRC.size if checksummed else 0)
    if n < total:
        return NeedMoreData(total - n)
    payload = bytes(buf[start: start + payload_len])
    if checksummed:
        (payload_crc,) = CRC.unpack_from(buf, start + payload_len)
        if zlib.crc32(payload) != payload_crc:
            raise ProtocolError("payload checksum mismatch", skip=_resync_skip(buf))

    kind = MessageType(msg_type)
    try:
        body = PARSERS[kind](seq, payload)
    except (ValueError, InvalidInput) as e:
        # the framing held, so drop exactly this message
        raise ProtocolError(f"malformed {kind.name} payload: {e}", skip=total) from e
    return WireMessage(kind, seq, send_ts, body, total)


def decode_chunk(buf: Buffer) -> Union[MediaChunk, NeedMoreData]:
    """Decode a MEDIA_CHUNK message at the start of buf."""
    result = decode_message(buf)
    if isinstance(result, NeedMoreData):
        return result
    if result.msg_type is not MessageType.MEDIA_CHUNK:
        raise ProtocolError(f"expected MEDIA_CHUNK, got {result.msg_type.name}", skip=result.size)
    return result.body


class StreamDecoder:
    """
    Single-owner reassembly buffer for a byte stream.

    Feed arbitrary slices; complete messages come out in order. Corrupt
    bytes are skipped up to the next magic and counted in ``errors``.
    """

    def __init__(self, label: str = "stream"):
        self._buffer = bytearray()
        self.label = label
        self.errors = 0
        self.skipped_bytes = 0
        self.last_error: Optional[str] = None

    def __len__(self) -> int:
        return len(self._buffer)

    def feed(self, data: Buffer) -> list[WireMessage]:
        self._buffer.extend(data)
        messages: list[WireMessage] = []
        while self._buffer:
            try:
                result = decode_message(self._buffer)
            except ProtocolError as e:
                skip = min(e.skip, len(self._buffer))
                self.errors += 1
                self.skipped_bytes += skip
                self.last_error = str(e)
                logger.warning(f"[{self.label}] {e}; skipping {skip} bytes")
                del self._buffer[:skip]
                continue
            if isinstance(result, NeedMoreData):
                break
            messages.append(result)
            del self._buffer[: result.size]
        return messages


# ===========================================
# PAYLOAD SIZING
# ===========================================

def payload_size(config, quality: Union[int, str, None] = None, frame: Optional[VideoFrame] = None) -> int:
    """
    Bytes on the wire for one MEDIA_CHUNK under a pipeline config.

    Args:
        config: PipelineConfig
        quality: 1-100, "raw", or None to use ``config.quality``
        frame: Frame to measure; defaults to the synthetic face at rest

    Returns:
        Exact framed size. Raw frames follow the size formula; compressed
        frames are measured by running the codec.
    """
    audio_bytes = 2 * config.chunk_samples
    if config.audio_only:
        return MEDIA_OVERHEAD + audio_bytes
    if quality is None:
        quality = config.quality if config.quality is not None else "raw"
    if frame is None:
        from src.scene.video import face_frame

        frame = face_frame(0.0, config.frame_width, config.frame_height, config.roi)
    if config.profile == "edge":
        roi = config.roi
        frame = frame.crop(roi.x, roi.y, roi.width, roi.height)
    if quality == "raw":
        return MEDIA_OVERHEAD + audio_bytes + frame.width * frame.height
    return MEDIA_OVERHEAD + audio_bytes + len(compress_frame(frame, int(quality)))
