"""
Synthetic talking-face video.

A smooth grey face on a gradient background whose mouth opens with the
target's loudness. Openings are quantized so identical frames recur, which
keeps the frame codec cache effective over long runs.
"""
from functools import lru_cache
from typing import Optional

import numpy as np

from src.config.constants import FRAME_HEIGHT, FRAME_WIDTH, SAMPLE_RATE, VIDEO_FPS
from src.models.inputs import Roi
from src.wire.types import VideoFrame

OPENING_LEVELS = 8
EDGE_SOFTNESS = 6.0


def _soft_ellipse(xx: np.ndarray, yy: np.ndarray, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    """1 inside, 0 outside, with a smooth rim a few pixels wide."""
    r = np.sqrt(((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2)
    return np.clip((1.0 - r) * min(rx, ry) / EDGE_SOFTNESS + 0.5, 0.0, 1.0)


def quantize_opening(opening: float) -> float:
    return round(float(np.clip(opening, 0.0, 1.0)) * (OPENING_LEVELS - 1)) / (OPENING_LEVELS - 1)


@lru_cache(maxsize=64)
def _render(opening: float, width: int, height: int, roi: Roi) -> VideoFrame:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    image = 60.0 + 40.0 * yy / max(height - 1, 1)

    face = _soft_ellipse(xx, yy, width / 2, height / 2, width * 0.22, height * 0.42)
    shade = 170.0 - 25.0 * ((xx - width / 2) / (width * 0.22)) ** 2
    image = image * (1 - face) + shade * face

    for ex in (width / 2 - width * 0.08, width / 2 + width * 0.08):
        eye = _soft_ellipse(xx, yy, ex, height * 0.38, width * 0.03, height * 0.025)
        image = image * (1 - eye) + 50.0 * eye

    cx = roi.x + roi.width / 2
    cy = roi.y + roi.height / 2
    lips = _soft_ellipse(xx, yy, cx, cy, roi.width * 0.42, roi.height * 0.32)
    image = image * (1 - lips) + 120.0 * lips
    if opening > 0:
        mouth = _soft_ellipse(xx, yy, cx, cy, roi.width * 0.34, max(1.0, opening * roi.height * 0.3))
        image = image * (1 - mouth) + 30.0 * mouth

    pixels = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    pixels.setflags(write=False)
    return VideoFrame(width, height, pixels)


def face_frame(
    opening: float,
    width: int = FRAME_WIDTH,
    height: int = FRAME_HEIGHT,
    roi: Optional[Roi] = None,
) -> VideoFrame:
    """
    Render one face frame.

    Args:
        opening: Mouth opening in [0, 1]; quantized to OPENING_LEVELS steps
        width, height: Frame size in pixels
        roi: Mouth region; defaults to the standard ROI
    """
    return _render(quantize_opening(opening), width, height, roi or Roi())


def mouth_openings(
    speech: np.ndarray,
    n_frames: int,
    sample_rate: int = SAMPLE_RATE,
    fps: float = VIDEO_FPS,
) -> np.ndarray:
    """
    Per-video-frame mouth opening from the target's RMS envelope.

    Returns:
        n_frames values in [0, 1], normalized by the loudest frame
    """
    speech = np.asarray(speech, dtype=np.float64)
    bounds = (np.arange(n_frames + 1) * sample_rate / fps).astype(np.int64)
    rms = np.zeros(n_frames)
    for i in range(n_frames):
        segment = speech[bounds[i]: bounds[i + 1]]
        if segment.size:
            rms[i] = np.sqrt(np.mean(segment * segment))
    peak = rms.max() if n_frames else 0.0
    return rms / peak if peak > 0 else rms


def render_video(
    openings: np.ndarray,
    width: int = FRAME_WIDTH,
    height: int = FRAME_HEIGHT,
    roi: Optional[Roi] = None,
) -> list[VideoFrame]:
    return [face_frame(o, width, height, roi) for o in openings]
