"""
Deterministic discrete-event run of the client/server pipeline.

Messages go through the real encoder and StreamDecoder, and the client
and server cores are the ones the live service uses; only the clock and
the transport are virtual. Events are ordered by (time, insertion order).
"""
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from src.config.constants import ControlCode
from src.models.inputs import PipelineConfig, SceneParams
from src.netem.link import FORWARD, REVERSE, DirectionLink
from src.pipeline.calculus import plan_schedule, resolve_channel, validate_config
from src.pipeline.client import ClientCore
from src.pipeline.events import EventLog
from src.pipeline.media import MediaSource, build_media_source
from src.pipeline.server import ServerCore
from src.scene.io import from_pcm
from src.utils.errors import ConfigError
from src.wire.framing import StreamDecoder, encode_message
from src.wire.types import Control, EnhancedAudio, MediaChunk

logger = logging.getLogger(__name__)

CAPTURE = "capture"
SERVER_RX = "server_rx"
CLIENT_RX = "client_rx"
RELEASE = "release"
ACK_TIMEOUT = "ack_timeout"


@dataclass(eq=False)
class RunResult:
    """Everything one session produced, simulated or live."""
    config: PipelineConfig
    log: EventLog
    played: np.ndarray
    clean: np.ndarray
    mixture: np.ndarray
    payload_bytes: int
    protocol_errors: int = 0
    stats: dict[str, Any] = field(default_factory=dict)


class _Simulator:
    def __init__(self, cfg: PipelineConfig, source: MediaSource):
        self.cfg = cfg
        self.source = source
        self.schedule = plan_schedule(cfg)
        channel = resolve_channel(cfg)
        self.forward = DirectionLink(channel, FORWARD)
        self.reverse = DirectionLink(channel, REVERSE)
        self.client = ClientCore(cfg, source, self.schedule, label="sim-client")
        self.server = ServerCore(cfg, self.schedule, oracle=source.clean, label="sim-server")
        self.server_rx = StreamDecoder("sim-server")
        self.client_rx = StreamDecoder("sim-client")
        self._queue: list = []
        self._order = itertools.count()
        self._release_pending = False
        self._server_eos_sent = False
        self.now_us = 0

    def push(self, t_us: int, kind: str, payload: Any = None) -> None:
        heapq.heappush(self._queue, (t_us, next(self._order), kind, payload))

    def run(self) -> None:
        for seq in range(self.client.total):
            self.push(self.client.capture_us(seq), CAPTURE, seq)
        handlers = {
            CAPTURE: lambda _: self._try_send(),
            SERVER_RX: self._on_server_rx,
            CLIENT_RX: self._on_client_rx,
            RELEASE: self._on_release,
            ACK_TIMEOUT: self._on_ack_timeout,
        }
        while self._queue:
            t_us, _, kind, payload = heapq.heappop(self._queue)
            self.now_us = t_us
            handlers[kind](payload)

    # ===========================================
    # CLIENT
    # ===========================================

    def _try_send(self) -> None:
        seq = self.client.can_send(self.now_us)
        if seq is None:
            return
        data = encode_message(self.client.build_chunk(seq), self.now_us)
        deadline = self.client.mark_sent(seq, self.now_us, len(data))
        arrival = self.forward.transmit(self.now_us, len(data))
        if arrival is not None:
            self.push(arrival, SERVER_RX, data)
        if deadline is not None:
            self.push(deadline, ACK_TIMEOUT, seq)
        eos = self.client.end_of_stream()
        if eos is not None:
            data = encode_message(eos, self.now_us)
            self.push(self.forward.transmit(self.now_us, len(data), droppable=False), SERVER_RX, data)

    def _on_ack_timeout(self, seq: int) -> None:
        if self.client.on_ack_timeout(seq):
            self._try_send()

    def _on_client_rx(self, data: bytes) -> None:
        for message in self.client_rx.feed(data):
            body = message.body
            if isinstance(body, EnhancedAudio):
                play = self.client.on_enhanced(body, self.now_us)
                if play is not None:
                    self.client.mark_played(body.seq, play)
            elif isinstance(body, Control) and body.code == ControlCode.ACK:
                self.client.on_ack(body.seq)
                self._try_send()

    # ===========================================
    # SERVER
    # ===========================================

    def _on_server_rx(self, data: bytes) -> None:
        for message in self.server_rx.feed(data):
            body = message.body
            if isinstance(body, MediaChunk):
                ack = self.server.on_media(body, self.now_us)
                reply = encode_message(ack, self.now_us)
                self.push(self.reverse.transmit(self.now_us, len(reply), droppable=False), CLIENT_RX, reply)
            elif isinstance(body, Control) and body.code == ControlCode.END_OF_STREAM:
                self.server.on_end_of_stream(body.seq, self.now_us)
        self._run_windows()
        self._schedule_release()

    def _run_windows(self) -> None:
        while (job := self.server.ready_window()) is not None:
            self.server.simulate_window(job)

    def _schedule_release(self) -> None:
        if self._release_pending:
            return
        upcoming = self.server.next_release()
        if upcoming is not None:
            seq, due = upcoming
            self._release_pending = True
            self.push(max(due, self.now_us), RELEASE, seq)
        elif self.server.finished and not self._server_eos_sent:
            self._server_eos_sent = True
            data = encode_message(Control(ControlCode.END_OF_STREAM, self.server.total), self.now_us)
            self.push(self.reverse.transmit(self.now_us, len(data), droppable=False), CLIENT_RX, data)

    def _on_release(self, seq: int) -> None:
        self._release_pending = False
        data = encode_message(self.server.take_release(seq, self.now_us), self.now_us)
        arrival = self.reverse.transmit(self.now_us, len(data))
        if arrival is not None:
            self.push(arrival, CLIENT_RX, data)
        self._schedule_release()


def run_simulation(
    cfg: PipelineConfig,
    duration_s: float,
    source: Optional[MediaSource] = None,
    scene_params: Optional[SceneParams] = None,
) -> RunResult:
    """
    Simulate one session end to end.

    Args:
        cfg: Pipeline config with mode="sim"
        duration_s: Media length when no source is given
        source: Prebuilt media, reused across paired runs
        scene_params: Scene settings for a freshly built source

    Returns:
        RunResult with the event log and the played audio

    Raises:
        ConfigError: On an invalid config or a live-mode config
    """
    cfg = validate_config(cfg)
    if cfg.mode != "sim":
        raise ConfigError("simulate needs mode=sim")
    if source is None:
        source = build_media_source(cfg, duration_s, scene_params)

    sim = _Simulator(cfg, source)
    sim.run()
    log = sim.client.finalize()
    protocol_errors = sim.server_rx.errors + sim.client_rx.errors + sim.server.protocol_errors
    stats = {
        **sim.server.stats,
        "forward_lost": sim.forward.lost,
        "reverse_lost": sim.reverse.lost,
        "ack_timeouts": len(sim.client.timeouts),
        "end_us": sim.now_us,
    }
    logger.info(
        f"Simulated {source.n_chunks} chunks on {cfg.channel.name}: {stats['windows']} windows, "
        f"{stats['concealed']} concealed, {stats['reverse_lost']} lost on the way back"
    )
    return RunResult(
        config=cfg,
        log=log,
        played=sim.client.played_audio(),
        clean=source.clean[: source.n_chunks * source.chunk_samples],
        mixture=from_pcm(source.mixture[: source.n_chunks * source.chunk_samples]),
        payload_bytes=sim.client.payload_bytes,
        protocol_errors=protocol_errors,
        stats=stats,
    )


def simulate(cfg: PipelineConfig, duration_s: float, **kwargs) -> EventLog:
    """Event log of a simulated session; see run_simulation."""
    return run_simulation(cfg, duration_s, **kwargs).log
