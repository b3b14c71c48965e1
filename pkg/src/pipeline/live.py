"""
Live loopback service over asyncio streams.

Server: three loops per connection (receive + preprocess, enhancement
worker, send-back). Client: two loops (capture + send, receive + playout).
The cores are the ones the simulator drives; shared state is touched only
inside ``async with`` blocks on one condition, and enhancement runs in a
worker thread with the condition released.
"""
import asyncio
import logging
from typing import Optional
from uuid import uuid4

import numpy as np

from src.config.constants import ControlCode
from src.dsp.enhancers import enhance
from src.models.inputs import PipelineConfig, SceneParams
from src.netem.link import FORWARD, REVERSE, EmulatedLink
from src.pipeline.calculus import plan_schedule, resolve_channel, validate_config
from src.pipeline.client import ClientCore
from src.pipeline.media import MediaSource, build_media_source
from src.pipeline.server import ServerCore
from src.pipeline.simulation import RunResult
from src.scene.io import from_pcm
from src.utils.clock import WallClock
from src.utils.errors import ConfigError
from src.utils.health_monitor import pipeline_monitor
from src.wire.framing import StreamDecoder, encode_message
from src.wire.types import Control, EnhancedAudio, MediaChunk

logger = logging.getLogger(__name__)

READ_SIZE = 1 << 16


# ===========================================
# SERVER
# ===========================================

class _ServerSession:
    def __init__(self, cfg: PipelineConfig, oracle: Optional[np.ndarray],
                 reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.cfg = cfg
        self.session_id = uuid4().hex[:8]
        self.core = ServerCore(cfg, oracle=oracle, label=self.session_id)
        self.reader = reader
        self.writer = writer
        self.decoder = StreamDecoder(self.session_id)
        self.clock = WallClock()
        self.link: Optional[EmulatedLink] = None
        self.changed = asyncio.Condition()
        self.hello_errors = 0

    def _open_link(self) -> EmulatedLink:
        if self.link is None:
            self.link = EmulatedLink(self.writer, resolve_channel(self.cfg), REVERSE, self.clock, self.session_id)
            self.link.start()
        return self.link

    async def run(self) -> None:
        peer = self.writer.get_extra_info("peername")
        logger.info(f"[{self.session_id}] client connected from {peer}")
        await pipeline_monitor.session_started(self.session_id)
        tasks = [
            asyncio.create_task(self._worker(), name=f"{self.session_id}-worker"),
            asyncio.create_task(self._sender(), name=f"{self.session_id}-sender"),
        ]
        try:
            await self._receiver()
            await asyncio.gather(*tasks)
        except (ConnectionError, asyncio.IncompleteReadError) as e:
            logger.warning(f"[{self.session_id}] connection lost: {e}")
        finally:
            for task in tasks:
                task.cancel()
            await pipeline_monitor.session_finished(self.session_id, self.core.concealed_total)
            if self.link is not None:
                await self.link.close()
            else:
                self.writer.close()
            logger.info(f"[{self.session_id}] session closed: {self.core.stats}")

    async def _receiver(self) -> None:
        while True:
            data = await self.reader.read(READ_SIZE)
            if not data:
                async with self.changed:
                    if self.core.total is None:
                        logger.warning(f"[{self.session_id}] client closed before END_OF_STREAM")
                        self.core.on_end_of_stream(self.core.input.n_chunks, self.clock.now_us())
                    self.changed.notify_all()
                return
            errors_before = self.decoder.errors
            messages = self.decoder.feed(data)
            for _ in range(self.decoder.errors - errors_before):
                await pipeline_monitor.record_protocol_error(self.session_id)
            for message in messages:
                body = message.body
                if isinstance(body, Control) and body.code == ControlCode.HELLO:
                    await self._on_hello(body)
                elif isinstance(body, MediaChunk):
                    arrival = self.clock.now_us()
                    async with self.changed:
                        ack = self.core.on_media(body, arrival, self.clock.now_us())
                        self.changed.notify_all()
                    if ack.code == ControlCode.ERROR:
                        await pipeline_monitor.record_protocol_error(self.session_id)
                    self._open_link().send(encode_message(ack, self.clock.now_us()), droppable=False)
                elif isinstance(body, Control) and body.code == ControlCode.END_OF_STREAM:
                    async with self.changed:
                        self.core.on_end_of_stream(body.seq, self.clock.now_us())
                        self.changed.notify_all()

    async def _on_hello(self, body: Control) -> None:
        """Adopt the client clock origin carried in HELLO (nanoseconds)."""
        if body.text:
            try:
                self.clock = WallClock(int(body.text))
            except ValueError:
                self.hello_errors += 1
                await pipeline_monitor.record_protocol_error(self.session_id)
                logger.warning(f"[{self.session_id}] HELLO carries a bad clock origin {body.text[:32]!r}; keeping ours")
        self._open_link()

    async def _worker(self) -> None:
        while True:
            async with self.changed:
                while (job := self.core.ready_window()) is None:
                    if self.core.total is not None and self.core.windows_finished:
                        return
                    await self.changed.wait()
                start = self.core.job_start_us(job)
            await self.clock.sleep_until(start)
            async with self.changed:
                window, ctx = self.core.window_media(job)
            started = self.clock.now_us()
            result = await asyncio.to_thread(enhance, window, self.core.spec, ctx, self.clock)
            async with self.changed:
                self.core.complete_window(job, started, self.clock.now_us(), result.audio)
                self.changed.notify_all()

    async def _sender(self) -> None:
        while True:
            async with self.changed:
                while (upcoming := self.core.next_release()) is None:
                    if self.core.finished:
                        eos = Control(ControlCode.END_OF_STREAM, self.core.total)
                        self._open_link().send(encode_message(eos, self.clock.now_us()), droppable=False)
                        return
                    await self.changed.wait()
            seq, due = upcoming
            await self.clock.sleep_until(due)
            async with self.changed:
                msg = self.core.take_release(seq, self.clock.now_us())
            self._open_link().send(encode_message(msg, msg.timestamps.sent_back))
            await pipeline_monitor.record_chunk(self.session_id, _stage_ms(msg))


def _stage_ms(msg: EnhancedAudio) -> dict[str, float]:
    ts = msg.timestamps
    return {
        "preprocess": (ts.preprocessed - ts.arrived) / 1000.0,
        "queue": (ts.enhance_start - ts.preprocessed) / 1000.0,
        "enhance": (ts.enhance_done - ts.enhance_start) / 1000.0,
        "hold": (ts.sent_back - ts.enhance_done) / 1000.0,
    }


class LiveServer:
    """
    Stream server running one ServerCore per connection.

    Protocol errors are logged and counted per connection; the listener
    keeps accepting.
    """

    def __init__(self, cfg: PipelineConfig, oracle: Optional[np.ndarray] = None):
        self.cfg = validate_config(cfg)
        self.oracle = oracle
        self.sessions: list[_ServerSession] = []
        self._server: Optional[asyncio.AbstractServer] = None

    async def start(self) -> int:
        """Start listening; returns the bound port."""
        self._server = await asyncio.start_server(self._handle, self.cfg.host, self.cfg.port)
        port = self._server.sockets[0].getsockname()[1]
        logger.info(f"Server listening on {self.cfg.host}:{port}")
        return port

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = _ServerSession(self.cfg, self.oracle, reader, writer)
        self.sessions.append(session)
        await session.run()

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    @property
    def protocol_errors(self) -> int:
        return sum(s.decoder.errors + s.core.protocol_errors + s.hello_errors for s in self.sessions)


async def run_server(cfg: PipelineConfig, oracle: Optional[np.ndarray] = None) -> None:
    """Serve until cancelled."""
    server = LiveServer(cfg, oracle)
    try:
        await server.serve_forever()
    finally:
        await server.close()


# ===========================================
# CLIENT
# ===========================================

class LiveClient:
    """
    Streams a MediaSource to a LiveServer and plays what comes back.

    Args:
        cfg: Pipeline config; host and port name the server
        source: Media to stream
    """

    def __init__(self, cfg: PipelineConfig, source: MediaSource):
        self.cfg = validate_config(cfg, check_coherence=False)
        self.source = source
        self.clock = WallClock()
        self.session_id = uuid4().hex[:8]
        self.core = ClientCore(self.cfg, source, plan_schedule(self.cfg), label=self.session_id)
        self.decoder = StreamDecoder(self.session_id)
        self._acked = asyncio.Event()

    async def run(self, host: Optional[str] = None, port: Optional[int] = None) -> RunResult:
        reader, writer = await asyncio.open_connection(host or self.cfg.host, port or self.cfg.port)
        self.clock = WallClock()
        link = EmulatedLink(writer, resolve_channel(self.cfg), FORWARD, self.clock, self.session_id)
        link.start()
        link.send(encode_message(Control(ControlCode.HELLO, 0, str(self.clock.origin_ns)), 0), droppable=False)
        logger.info(f"[{self.session_id}] streaming {self.core.total} chunks to {host or self.cfg.host}:{port or self.cfg.port}")

        receiver = asyncio.create_task(self._receive(reader), name=f"{self.session_id}-receive")
        try:
            await self._capture_and_send(link)
            await receiver
        finally:
            receiver.cancel()
            await link.close()

        log = self.core.finalize()
        n = self.source.n_chunks * self.source.chunk_samples
        return RunResult(
            config=self.cfg,
            log=log,
            played=self.core.played_audio(),
            clean=self.source.clean[:n],
            mixture=from_pcm(self.source.mixture[:n]),
            payload_bytes=self.core.payload_bytes,
            protocol_errors=self.decoder.errors,
            stats={"ack_timeouts": len(self.core.timeouts), "received": self.core.received},
        )

    async def _capture_and_send(self, link: EmulatedLink) -> None:
        deadline: Optional[int] = None
        for seq in range(self.core.total):
            await self.clock.sleep_until(self.core.capture_us(seq))
            if self.core.awaiting is not None:
                await self._wait_for_ack(deadline)
            chunk = self.core.build_chunk(seq)
            now = self.clock.now_us()
            data = encode_message(chunk, now)
            self._acked.clear()
            deadline = self.core.mark_sent(seq, now, len(data))
            link.send(data)
        eos = self.core.end_of_stream()
        if eos is not None:
            link.send(encode_message(eos, self.clock.now_us()), droppable=False)

    async def _wait_for_ack(self, deadline: Optional[int]) -> None:
        awaiting = self.core.awaiting
        timeout = None if deadline is None else max(0.0, (deadline - self.clock.now_us()) / 1e6)
        try:
            await asyncio.wait_for(self._acked.wait(), timeout)
        except asyncio.TimeoutError:
            self.core.on_ack_timeout(awaiting)

    async def _receive(self, reader: asyncio.StreamReader) -> None:
        while True:
            data = await reader.read(READ_SIZE)
            if not data:
                logger.warning(f"[{self.session_id}] server closed the connection")
                return
            for message in self.decoder.feed(data):
                body = message.body
                if isinstance(body, EnhancedAudio):
                    play = self.core.on_enhanced(body, self.clock.now_us())
                    if play is not None:
                        # the playout device starts the chunk at its scheduled time
                        self.core.mark_played(body.seq, play)
                elif isinstance(body, Control) and body.code == ControlCode.ACK:
                    self.core.on_ack(body.seq)
                    if self.core.awaiting is None:
                        self._acked.set()
                elif isinstance(body, Control) and body.code == ControlCode.END_OF_STREAM:
                    logger.info(f"[{self.session_id}] server finished after {body.seq} chunks")
                    return


async def run_client(cfg: PipelineConfig, source: MediaSource) -> RunResult:
    return await LiveClient(cfg, source).run()


async def run_loopback(
    cfg: PipelineConfig,
    duration_s: float,
    source: Optional[MediaSource] = None,
    scene_params: Optional[SceneParams] = None,
) -> RunResult:
    """
    Server and client in one process on an ephemeral 127.0.0.1 port.

    Returns:
        The client's RunResult, with server-side protocol errors added
    """
    cfg = validate_config(cfg).model_copy(update={"host": "127.0.0.1", "port": 0})
    if cfg.mode != "live":
        raise ConfigError("run_loopback needs mode=live")
    if source is None:
        source = build_media_source(cfg, duration_s, scene_params)
    server = LiveServer(cfg, oracle=source.clean)
    port = await server.start()
    try:
        result = await LiveClient(cfg, source).run("127.0.0.1", port)
    finally:
        await server.close()
    result.protocol_errors += server.protocol_errors
    if server.sessions:
        result.stats.update(server.sessions[0].core.stats)
    logger.info(f"Loopback run finished: {result.stats}")
    return result
