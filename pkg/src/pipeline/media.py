"""
Client-side media: a rendered scene cut into chunks with one face frame each,
plus the server's preprocessing of arriving chunks.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.models.inputs import PipelineConfig, Roi, SceneParams
from src.scene.io import from_pcm, to_pcm
from src.scene.signals import clean_sum, mix
from src.scene.synth import synth_scene
from src.scene.video import face_frame, mouth_openings
from src.utils.errors import CodecError, InvalidInput
from src.wire.codec import compress_cached, decompress_cached
from src.wire.types import MediaChunk, VideoFrame

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MediaSource:
    """
    Everything the capture side reads from.

    Attributes:
        mixture: Microphone signal as int16 PCM
        clean: Sum of clean targets, float, aligned with mixture
        openings: Mouth opening per video frame
    """
    mixture: np.ndarray
    clean: np.ndarray
    openings: np.ndarray
    sample_rate: int
    chunk_samples: int
    fps: float
    frame_width: int
    frame_height: int
    roi: Roi

    @property
    def n_chunks(self) -> int:
        return self.mixture.size // self.chunk_samples

    @property
    def duration_s(self) -> float:
        return self.n_chunks * self.chunk_samples / self.sample_rate

    def audio(self, seq: int) -> np.ndarray:
        cs = self.chunk_samples
        return self.mixture[seq * cs: (seq + 1) * cs]

    def frame(self, seq: int) -> VideoFrame:
        t = seq * self.chunk_samples / self.sample_rate
        index = min(int(t * self.fps), self.openings.size - 1)
        return face_frame(float(self.openings[index]), self.frame_width, self.frame_height, self.roi)

    def build_chunk(self, seq: int, capture_us: int, cfg: PipelineConfig) -> MediaChunk:
        """
        The chunk the client transmits for seq under cfg's profile and quality.

        Edge clients preprocess locally and send only the mouth crop.
        """
        audio = self.audio(seq)
        if cfg.audio_only:
            return MediaChunk(seq, capture_us, audio)
        frame = self.frame(seq)
        if cfg.profile == "edge":
            frame = frame.crop(self.roi.x, self.roi.y, self.roi.width, self.roi.height)
        if cfg.quality is None:
            return MediaChunk(seq, capture_us, audio, frame)
        data = compress_cached(frame.to_bytes(), frame.width, frame.height, cfg.quality)
        return MediaChunk(seq, capture_us, audio, data, compressed=True, quality=cfg.quality)


def build_media_source(
    cfg: PipelineConfig,
    duration_s: float,
    scene_params: Optional[SceneParams] = None,
    seed: Optional[int] = None,
) -> MediaSource:
    """
    Render a scene and its talking face for a pipeline run.

    Args:
        cfg: Supplies sample rate, chunk size and frame geometry
        duration_s: Media length; trailing samples short of a chunk are dropped
        scene_params: Scene settings; duration and sample rate are taken from cfg
        seed: Scene seed, defaults to cfg.seed
    """
    params = (scene_params or SceneParams()).model_copy(
        update={"duration_s": duration_s, "sample_rate": cfg.sample_rate}
    )
    scene = synth_scene(params, cfg.seed if seed is None else seed)
    mixture, refs, _ = mix(scene)
    if int(mixture.samples.size // cfg.chunk_samples) < 1:
        raise InvalidInput(f"{duration_s}s of media is shorter than one chunk")
    n_frames = int(np.ceil(len(mixture) / cfg.sample_rate * cfg.fps)) + 1
    openings = mouth_openings(refs[0].samples, n_frames, cfg.sample_rate, cfg.fps)
    return MediaSource(
        mixture=to_pcm(mixture.samples),
        clean=clean_sum(refs).samples,
        openings=openings,
        sample_rate=cfg.sample_rate,
        chunk_samples=cfg.chunk_samples,
        fps=cfg.fps,
        frame_width=cfg.frame_width,
        frame_height=cfg.frame_height,
        roi=cfg.roi,
    )


def preprocess(chunk: MediaChunk, cfg: PipelineConfig) -> tuple[np.ndarray, Optional[VideoFrame]]:
    """
    Server feature-extraction stage: PCM to float, frame decoded and cut to the mouth ROI.

    Raises:
        CodecError: If a compressed frame cannot be decoded
    """
    audio = from_pcm(chunk.audio)
    if chunk.frame is None:
        return audio, None
    frame = decompress_cached(chunk.frame) if chunk.compressed else chunk.frame
    roi = cfg.roi
    if (frame.width, frame.height) == (roi.width, roi.height):
        return audio, frame
    if not roi.fits(frame.width, frame.height):
        raise CodecError(f"Chunk {chunk.seq} frame {frame.width}x{frame.height} does not contain the ROI")
    return audio, frame.crop(roi.x, roi.y, roi.width, roi.height)


def crop_roi(cfg: PipelineConfig) -> Roi:
    """ROI expressed inside the preprocessed crop."""
    return Roi(x=0, y=0, width=cfg.roi.width, height=cfg.roi.height)
