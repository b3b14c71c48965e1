"""
Client state machine: capture and stop-and-wait upload on one side,
reception and playout on the other.

The client owns the event log. Server-side events come from the
timestamps each EnhancedAudio carries, so the log is assembled the same
way in simulation and in the live service.
"""
import logging
from typing import Optional

import numpy as np

from src.config.constants import ControlCode
from src.models.inputs import PipelineConfig
from src.pipeline.calculus import Schedule, plan_schedule
from src.pipeline.events import EventLog
from src.pipeline.media import MediaSource
from src.scene.io import from_pcm
from src.wire.types import Control, EnhancedAudio, MediaChunk

logger = logging.getLogger(__name__)


class PlayoutScheduler:
    """
    Fixed-delay playout.

    The first chunk to arrive fixes the playout origin ``prebuffer`` after
    its arrival; chunk n then plays at origin + n * t_chunk, or on arrival
    if it is late, and never sooner than one chunk after the previous one.
    """

    def __init__(self, t_chunk_us: int, prebuffer_us: int = 0):
        self.t_chunk_us = t_chunk_us
        self.prebuffer_us = prebuffer_us
        self.origin_us: Optional[int] = None
        self._last_play_us: Optional[int] = None

    def schedule(self, seq: int, arrival_us: int) -> int:
        if self.origin_us is None:
            self.origin_us = arrival_us + self.prebuffer_us - seq * self.t_chunk_us
        play = max(arrival_us, self.origin_us + seq * self.t_chunk_us)
        if self._last_play_us is not None:
            play = max(play, self._last_play_us + self.t_chunk_us)
        self._last_play_us = play
        return play


class ClientCore:
    """
    Capture, upload and playout bookkeeping for one session.

    Args:
        cfg: Validated pipeline config
        source: Media to stream
        schedule: Shared timing plan, defaults to plan_schedule(cfg)
        label: Tag for log lines
    """

    def __init__(
        self,
        cfg: PipelineConfig,
        source: MediaSource,
        schedule: Optional[Schedule] = None,
        label: str = "client",
    ):
        self.cfg = cfg
        self.source = source
        self.schedule = schedule or plan_schedule(cfg)
        self.label = label
        self.total = source.n_chunks
        self.log = EventLog(cfg.t_chunk, self.total)
        self.playout = PlayoutScheduler(self.schedule.t_chunk_us, self.schedule.prebuffer_us)

        self.next_seq = 0
        self.awaiting: Optional[int] = None
        self.eos_sent = False
        self.timeouts: set[int] = set()
        self.payload_bytes = 0
        self._received: dict[int, np.ndarray] = {}
        self._finalized = False

    # ===========================================
    # CAPTURE / UPLOAD
    # ===========================================

    def capture_us(self, seq: int) -> int:
        """Chunk seq is complete once its last sample has been captured."""
        return (seq + 1) * self.schedule.t_chunk_us

    def can_send(self, now_us: int) -> Optional[int]:
        """Seq that may be uploaded at now_us, or None."""
        if self.awaiting is not None or self.next_seq >= self.total:
            return None
        if self.capture_us(self.next_seq) > now_us:
            return None
        return self.next_seq

    def next_send_us(self) -> Optional[int]:
        """When the next upload becomes possible if no acknowledgement is outstanding."""
        if self.awaiting is not None or self.next_seq >= self.total:
            return None
        return self.capture_us(self.next_seq)

    def build_chunk(self, seq: int) -> MediaChunk:
        return self.source.build_chunk(seq, self.capture_us(seq), self.cfg)

    def mark_sent(self, seq: int, sent_us: int, size_bytes: int) -> Optional[int]:
        """
        Record an upload.

        Returns:
            Ack deadline in microseconds when the link can lose messages, else None
        """
        self.log.record_us(seq, "captured", self.capture_us(seq))
        self.log.record_us(seq, "sent", sent_us)
        self.awaiting = seq
        self.next_seq = seq + 1
        self.payload_bytes = max(self.payload_bytes, size_bytes)
        if self.schedule.lossy:
            return sent_us + self.schedule.ack_timeout_us
        return None

    def on_ack(self, seq: int) -> None:
        if self.awaiting == seq:
            self.awaiting = None
        else:
            logger.debug(f"[{self.label}] stale ack for {seq}")

    def on_ack_timeout(self, seq: int) -> bool:
        """Give up waiting for seq; returns True if it was still outstanding."""
        if self.awaiting != seq:
            return False
        logger.warning(f"[{self.label}] no ack for chunk {seq}; moving on")
        self.timeouts.add(seq)
        self.awaiting = None
        return True

    def end_of_stream(self) -> Optional[Control]:
        """END_OF_STREAM once every chunk has been handed to the link, else None."""
        if self.eos_sent or self.next_seq < self.total:
            return None
        self.eos_sent = True
        return Control(ControlCode.END_OF_STREAM, self.total)

    # ===========================================
    # RECEIVE / PLAYOUT
    # ===========================================

    def on_enhanced(self, msg: EnhancedAudio, arrival_us: int) -> Optional[int]:
        """
        Log a returned chunk with its server timestamps.

        Returns:
            Scheduled play time, or None for a duplicate
        """
        seq = msg.seq
        if seq in self._received or seq >= self.total:
            logger.debug(f"[{self.label}] ignoring enhanced chunk {seq}")
            return None
        ts = msg.timestamps
        self.log.record_us(seq, "arrived_server", ts.arrived)
        self.log.record_us(seq, "preprocessed", ts.preprocessed)
        self.log.record_us(seq, "enhance_start", ts.enhance_start)
        self.log.record_us(seq, "enhance_done", ts.enhance_done)
        self.log.record_us(seq, "sent_back", ts.sent_back)
        self.log.record_us(seq, "arrived_client", arrival_us)
        if msg.enhanced:
            self.log.record_us(seq, "enhanced", ts.enhance_done)
        if msg.concealed:
            self.log.record_us(seq, "dropped", ts.arrived)
        self._received[seq] = from_pcm(msg.audio)
        return self.playout.schedule(seq, arrival_us)

    def mark_played(self, seq: int, t_us: int) -> None:
        self.log.record_us(seq, "played", t_us)

    @property
    def received(self) -> int:
        return len(self._received)

    def finalize(self) -> EventLog:
        """Mark chunks that never came back as dropped and return the log."""
        if not self._finalized:
            missing = [seq for seq in range(self.total) if seq not in self._received]
            for seq in missing:
                self.log.record(seq, "dropped", self.log.times(seq).get("sent", 0.0))
            if missing:
                logger.warning(f"[{self.label}] {len(missing)} chunks never came back")
            self._finalized = True
        return self.log

    def played_audio(self) -> np.ndarray:
        """Received audio in media order; chunks that never came back are silent."""
        cs = self.cfg.chunk_samples
        out = np.zeros(self.total * cs)
        for seq, audio in self._received.items():
            out[seq * cs: (seq + 1) * cs] = audio
        return out
