"""
Loopback tests for the asyncio client and server.
"""
import asyncio

import pytest

from src.config.constants import ControlCode
from src.metrics.latency import build_report
from src.models.inputs import ChannelModel
from src.pipeline.live import LiveServer, run_loopback
from src.pipeline.simulation import run_simulation
from src.utils.errors import ConfigError
from src.wire.framing import StreamDecoder, encode_message
from src.wire.types import Control


@pytest.fixture
def live_config(short_config):
    """short_config over a zero-delay loopback link in live mode."""
    return short_config.model_copy(update={
        "mode": "live",
        "channel": ChannelModel(preset="loopback"),
        "port": 0,
    })


class TestLoopback:
    """Tests running server and client in one event loop."""

    async def test_session_completes(self, live_config, short_source):
        """Every chunk comes back and the stream is clean."""
        result = await run_loopback(live_config, 3.0, source=short_source)
        assert result.protocol_errors == 0
        assert result.played.size == short_source.n_chunks * short_source.chunk_samples
        assert len(result.log.played()) == short_source.n_chunks
        assert result.log.dropped == set()

    async def test_events_in_pipeline_order(self, live_config, short_source):
        """Wall-clock events keep the pipeline order."""
        result = await run_loopback(live_config, 3.0, source=short_source)
        assert result.log.monotonicity_violations() == []

    async def test_delay_tracks_simulation(self, live_config, short_source):
        """Mean delay of the live run is within 15% of the simulated one."""
        live = build_report(await run_loopback(live_config, 3.0, source=short_source))
        sim_cfg = live_config.model_copy(update={"mode": "sim"})
        sim = build_report(run_simulation(sim_cfg, 3.0, source=short_source))
        assert live.t_delay.mean == pytest.approx(sim.t_delay.mean, rel=0.15)

    async def test_server_stats_merged(self, live_config, short_source):
        """The loopback result carries the server's window counters."""
        result = await run_loopback(live_config, 3.0, source=short_source)
        assert result.stats["windows"] >= 1

    async def test_sim_mode_rejected(self, short_config):
        """Loopback needs a live config."""
        with pytest.raises(ConfigError):
            await run_loopback(short_config, 3.0)


class TestLiveServer:
    """Tests for the listener on its own."""

    async def test_ephemeral_port(self, live_config):
        """Port 0 binds a free port."""
        server = LiveServer(live_config)
        port = await server.start()
        try:
            assert port > 0
            assert server.protocol_errors == 0
        finally:
            await server.close()

    async def test_malformed_hello_counted(self, live_config):
        """A HELLO whose clock origin is not a number is a protocol error, not a crash."""
        server = LiveServer(live_config)
        port = await server.start()
        try:
            reader, writer = await asyncio.open_connection(live_config.host, port)
            writer.write(encode_message(Control(ControlCode.HELLO, 0, "not-a-clock")))
            await writer.drain()
            writer.write_eof()
            data = await asyncio.wait_for(reader.read(), timeout=10)
            writer.close()
            replies = [m.body for m in StreamDecoder("client").feed(data)]
            assert [r.code for r in replies] == [ControlCode.END_OF_STREAM]
            assert replies[0].seq == 0
            for _ in range(100):
                if server.sessions and server.protocol_errors:
                    break
                await asyncio.sleep(0.01)
            assert server.protocol_errors == 1
            assert server.sessions[0].hello_errors == 1
        finally:
            await server.close()
