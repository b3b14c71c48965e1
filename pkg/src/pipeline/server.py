"""
Server state machine shared by the simulator and the live service.

The core owns the input and output buffers and decides what happens next;
it never sleeps or touches a socket. Runtimes feed it arrivals, ask it for
the next enhancement window and the next release, and report back when
those happened.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.config.constants import ControlCode
from src.dsp.enhancers import EnhanceResult, MediaWindow, enhance
from src.models.inputs import PipelineConfig
from src.pipeline.buffers import BufferState, InputBuffer, OutputBuffer
from src.pipeline.calculus import Schedule, plan_schedule, resolve_enhancer
from src.pipeline.media import crop_roi, preprocess
from src.scene.io import to_pcm
from src.utils.clock import SimClock
from src.utils.errors import CodecError
from src.wire.types import Control, EnhancedAudio, MediaChunk, ServerTimestamps

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowJob:
    """
    One enhancement run.

    Samples [lo, hi) go into the enhancer; [keep_lo, keep_hi) of its
    output lands in the output buffer.
    """
    k: int
    lo: int
    hi: int
    keep_lo: int
    keep_hi: int
    slot_us: int
    ready_us: int
    tail: bool = False


class ServerCore:
    """
    Buffers, worker schedule and release schedule for one session.

    Args:
        cfg: Validated pipeline config
        schedule: Precomputed schedule, defaults to plan_schedule(cfg)
        oracle: Clean reference aligned with the media, for oracle_mask runs
        label: Tag for log lines
    """

    def __init__(
        self,
        cfg: PipelineConfig,
        schedule: Optional[Schedule] = None,
        oracle: Optional[np.ndarray] = None,
        label: str = "server",
    ):
        self.cfg = cfg
        self.schedule = schedule or plan_schedule(cfg)
        self.plan = self.schedule.plan
        self.spec = resolve_enhancer(cfg)
        self.oracle = oracle
        self.label = label

        cs, sr = cfg.chunk_samples, cfg.sample_rate
        self.input = InputBuffer(cs, sr)
        self.output = OutputBuffer(cs, sr)
        self.base_us: Optional[int] = None
        self.total: Optional[int] = None
        self.eos_us: Optional[int] = None

        # per-chunk stamps and concealment flags live until the chunk is released
        self._arrived: dict[int, int] = {}
        self._preprocessed: dict[int, int] = {}
        self.concealed: set[int] = set()
        self._output_start_us: Optional[int] = None
        self._pre_free_us = 0
        self._worker_free_us = 0
        self._next_window = 0
        self._windows_done = False
        self._next_out = 0
        self._last_release_us = 0

        self.windows_run = 0
        self.received = 0
        self.concealed_total = 0
        self.duplicates = 0
        self.protocol_errors = 0

    # ===========================================
    # RECEIVE + PREPROCESS
    # ===========================================

    def on_media(self, chunk: MediaChunk, arrival_us: int, done_us: Optional[int] = None) -> Control:
        """
        Accept a media chunk and return its acknowledgement.

        Args:
            chunk: Decoded chunk
            arrival_us: When its last byte arrived
            done_us: When preprocessing actually finished (live mode); the
                modelled time is used when absent or earlier

        Returns:
            The ACK to send back, or an ERROR for a chunk too far ahead of
            the buffer (``max_seq_gap``)
        """
        seq = chunk.seq
        gap = seq - self.input.n_chunks
        if gap > self.cfg.max_seq_gap:
            self.protocol_errors += 1
            logger.warning(
                f"[{self.label}] chunk {seq} is {gap} chunks ahead of the buffer "
                f"(limit {self.cfg.max_seq_gap}); rejected"
            )
            return Control(ControlCode.ERROR, seq, f"sequence jump of {gap} chunks")
        if self.base_us is None:
            self.base_us = arrival_us - seq * self.schedule.t_chunk_us
            logger.debug(f"[{self.label}] first chunk {seq} at {arrival_us}us, base {self.base_us}us")
        if seq < self.input.n_chunks or (self.total is not None and seq >= self.total):
            self.duplicates += 1
            logger.debug(f"[{self.label}] ignoring chunk {seq} (have {self.input.n_chunks})")
            return Control(ControlCode.ACK, seq)

        while self.input.n_chunks < seq:
            self._conceal(self.input.n_chunks, arrival_us)

        try:
            audio, frame = preprocess(chunk, self.cfg)
            if audio.size != self.cfg.chunk_samples:
                raise CodecError(f"{audio.size} samples, expected {self.cfg.chunk_samples}")
        except CodecError as e:
            self.protocol_errors += 1
            logger.warning(f"[{self.label}] chunk {seq} unusable ({e}); concealing")
            self._conceal(seq, arrival_us)
            return Control(ControlCode.ACK, seq)

        ready = max(arrival_us, self._pre_free_us) + self.schedule.preprocess_us
        if done_us is not None:
            ready = max(ready, done_us)
        self._pre_free_us = ready
        self._arrived[seq] = arrival_us
        self._preprocessed[seq] = ready
        self.input.append(seq, audio, frame)
        self.received += 1
        self._bypass(seq, ready)
        return Control(ControlCode.ACK, seq)

    def _conceal(self, seq: int, now_us: int) -> None:
        logger.warning(f"[{self.label}] chunk {seq} missing; concealing with silence")
        self.concealed.add(seq)
        self.concealed_total += 1
        self._arrived[seq] = now_us
        self._preprocessed[seq] = max(now_us, self._pre_free_us)
        self.input.conceal(seq)
        self._bypass(seq, self._preprocessed[seq])

    def _bypass(self, seq: int, ready_us: int) -> None:
        """Forward the part of chunk seq inside the startup skip unprocessed."""
        lo = seq * self.plan.chunk_samples
        hi = min(lo + self.plan.chunk_samples, self.plan.skip_samples)
        if hi > lo:
            self.output.write(lo, self.input.audio(lo, hi), ready_us)

    def on_end_of_stream(self, total: int, now_us: int) -> None:
        """The client has sent its last chunk; seqs below total that never came are concealed."""
        if self.total is not None:
            return
        gap = total - self.input.n_chunks
        if gap > self.cfg.max_seq_gap:
            self.protocol_errors += 1
            logger.warning(
                f"[{self.label}] END_OF_STREAM announces {total} chunks, {gap} beyond the buffer "
                f"(limit {self.cfg.max_seq_gap}); ending at {self.input.n_chunks}"
            )
            total = self.input.n_chunks
        self.total = total
        self.eos_us = now_us
        if self.base_us is None:
            self.base_us = now_us - total * self.schedule.t_chunk_us
        while self.input.n_chunks < total:
            self._conceal(self.input.n_chunks, now_us)
        media_end = total * self.plan.chunk_samples
        covered = self.plan.keep_start(self._next_window)
        if self._next_window == 0 and media_end < self.plan.window_samples and covered < media_end:
            logger.warning(
                f"[{self.label}] {media_end / self.cfg.sample_rate:.2f}s of media is shorter than one "
                f"window; forwarding the rest unprocessed"
            )
            self.output.write(covered, self.input.audio(covered, media_end), max(now_us, self._pre_free_us))
            self._windows_done = True
        logger.info(f"[{self.label}] end of stream after {total} chunks ({self.concealed_total} concealed)")

    # ===========================================
    # WORKER
    # ===========================================

    def ready_window(self) -> Optional[WindowJob]:
        """The next window whose media is fully buffered, or None."""
        if self._windows_done or self.base_us is None:
            return None
        k = self._next_window
        plan = self.plan
        end = plan.end(k)
        slot = self.base_us + self.schedule.worker_slot_us(k)
        if end <= self.input.written:
            ready = self._preprocessed[plan.trigger_chunk(k)]
            return WindowJob(k, plan.start(k), end, plan.keep_start(k), end, slot, ready)

        if self.total is None or self.input.n_chunks < self.total:
            return None
        media_end = self.total * plan.chunk_samples
        covered = plan.keep_start(k)
        if covered >= media_end:
            self._windows_done = True
            return None
        ready = self._preprocessed[self.total - 1]
        lo = max(0, media_end - plan.window_samples)
        return WindowJob(k, lo, media_end, covered, media_end, slot, ready, tail=True)

    def job_start_us(self, job: WindowJob) -> int:
        """Earliest time the worker may start job."""
        return max(job.slot_us, job.ready_us, self._worker_free_us)

    def window_media(self, job: WindowJob) -> tuple[MediaWindow, Optional[np.ndarray]]:
        """Media window for job plus the aligned clean reference, if any."""
        sr, cs = self.cfg.sample_rate, self.plan.chunk_samples
        frames = [] if self.cfg.audio_only else self.input.frames(job.lo, job.hi)
        window = MediaWindow(
            audio=self.input.audio(job.lo, job.hi),
            sample_rate=sr,
            frames=frames,
            roi=None if self.cfg.audio_only else crop_roi(self.cfg),
            fps=1.0 / self.cfg.t_chunk,
            start_s=job.lo / sr,
            frames_start_s=(job.lo // cs) * cs / sr,
        )
        ctx = None
        if self.oracle is not None:
            ctx = np.zeros(job.hi - job.lo)
            part = self.oracle[job.lo: job.hi]
            ctx[: part.size] = part
        return window, ctx

    def run_window(self, job: WindowJob, clock) -> EnhanceResult:
        """Enhance job's media; a SimClock is advanced by the charged latency."""
        window, ctx = self.window_media(job)
        return enhance(window, self.spec, ctx, clock)

    def complete_window(self, job: WindowJob, start_us: int, done_us: int, audio: np.ndarray) -> None:
        """Store the kept part of an enhancement run and move to the next window."""
        keep = audio[job.keep_lo - job.lo: job.keep_hi - job.lo]
        self.output.write(job.keep_lo, keep, done_us, window=(start_us, done_us))
        self._worker_free_us = done_us
        self.windows_run += 1
        self._next_window = job.k + 1
        self.input.consume_to(self.plan.start(job.k + 1))
        # a tail window reaches back one window from the media end, which is at least `written`
        self.input.evict_before(min(self.plan.start(job.k + 1), self.input.written - self.plan.window_samples))
        if job.tail:
            self._windows_done = True
        logger.debug(
            f"[{self.label}] window {job.k} [{job.lo}, {job.hi}) kept [{job.keep_lo}, {job.keep_hi}) "
            f"start {start_us}us done {done_us}us"
        )

    def simulate_window(self, job: WindowJob) -> tuple[int, int]:
        """Run job on a virtual clock at its earliest start; returns (start_us, done_us)."""
        start = self.job_start_us(job)
        clock = SimClock(start)
        result = self.run_window(job, clock)
        self.complete_window(job, start, clock.now_us(), result.audio)
        return start, clock.now_us()

    # ===========================================
    # RELEASE
    # ===========================================

    def next_release(self) -> Optional[tuple[int, int]]:
        """(seq, due_us) of the next chunk to send back once it is complete, else None."""
        seq = self._next_out
        if self.base_us is None or (self.total is not None and seq >= self.total):
            return None
        if self._output_start_us is None:
            self._output_start_us = self._output_start()
            if self._output_start_us is None:
                return None
        chunk = self.output.complete(seq)
        if chunk is None:
            return None
        due = max(
            self.base_us + self.schedule.release_slot_us(seq),
            chunk.ready_us,
            self._last_release_us,
            self._output_start_us,
        )
        return seq, due

    def _output_start(self) -> Optional[int]:
        """When the output buffer first held start_chunks complete chunks, or None if it does not yet."""
        n = self.schedule.start_chunks
        if self.total is not None:
            n = min(n, self.total)
        ready = 0
        for seq in range(n):
            chunk = self.output.complete(seq)
            if chunk is None:
                return None
            ready = max(ready, chunk.ready_us)
        return ready

    def take_release(self, seq: int, sent_us: int) -> EnhancedAudio:
        """Pop chunk seq from the output buffer as an EnhancedAudio message sent at sent_us."""
        if seq != self._next_out:
            raise ValueError(f"Release out of order: expected {self._next_out}, got {seq}")
        chunk = self.output.pop(seq)
        pre = self._preprocessed.pop(seq)
        concealed = seq in self.concealed
        self.concealed.discard(seq)
        start = chunk.enhance_start_us if chunk.enhance_start_us is not None else pre
        done = chunk.enhance_done_us if chunk.enhance_done_us is not None else pre
        stamps = ServerTimestamps(
            arrived=self._arrived.pop(seq),
            preprocessed=pre,
            enhance_start=start,
            enhance_done=done,
            sent_back=sent_us,
        )
        self._next_out = seq + 1
        self._last_release_us = sent_us
        return EnhancedAudio(seq, to_pcm(chunk.audio), stamps, chunk.enhanced, concealed)

    # ===========================================
    # STATE
    # ===========================================

    @property
    def windows_finished(self) -> bool:
        return self._windows_done

    @property
    def finished(self) -> bool:
        return self.total is not None and self._next_out >= self.total

    def buffer_state(self) -> BufferState:
        return BufferState(self.input.buffered_s, self.output.buffered_s)

    @property
    def stats(self) -> dict:
        return {
            "received": self.received,
            "concealed": self.concealed_total,
            "duplicates": self.duplicates,
            "windows": self.windows_run,
            "released": self._next_out,
            "protocol_errors": self.protocol_errors,
        }
