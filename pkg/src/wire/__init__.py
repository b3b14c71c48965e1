from src.wire.types import (
    Control,
    EnhancedAudio,
    MediaChunk,
    NeedMoreData,
    ServerTimestamps,
    VideoFrame,
    WireMessage,
)
from src.wire.codec import compress_frame, decompress_frame
from src.wire.framing import (
    CONTROL_OVERHEAD,
    ENHANCED_OVERHEAD,
    MEDIA_OVERHEAD,
    StreamDecoder,
    decode_chunk,
    decode_message,
    encode_chunk,
    encode_message,
    payload_size,
)

__all__ = [
    "Control",
    "EnhancedAudio",
    "MediaChunk",
    "NeedMoreData",
    "ServerTimestamps",
    "VideoFrame",
    "WireMessage",
    "compress_frame",
    "decompress_frame",
    "CONTROL_OVERHEAD",
    "ENHANCED_OVERHEAD",
    "MEDIA_OVERHEAD",
    "StreamDecoder",
    "decode_chunk",
    "decode_message",
    "encode_chunk",
    "encode_message",
    "payload_size",
]
