"""
Tests for latency decomposition, gap counting, quality and plot exports.
"""
import numpy as np
import pytest

from src.dsp.stft import stft
from src.metrics.latency import build_report, decompose, first_playback_delay, gap_report, latency_stats
from src.metrics.plots import latency_histogram, spectrogram_heatmap, write_grid_csv
from src.metrics.quality import quality
from src.pipeline.events import EventLog
from src.pipeline.simulation import run_simulation
from src.utils.errors import EmptyPlayback, IncompleteLog, InvalidInput


def _log(rows) -> EventLog:
    return EventLog.from_records(rows, 0.04)


def _round_trip(seq, sent, t1, t2, t3):
    return [
        (seq, "captured", sent),
        (seq, "sent", sent),
        (seq, "arrived_server", sent + t1),
        (seq, "sent_back", sent + t1 + t2),
        (seq, "arrived_client", sent + t1 + t2 + t3),
    ]


class TestDecompose:
    """Tests for the per-chunk t1/t2/t3 split."""

    def test_components(self):
        """Network legs and processing add to the delay."""
        log = _log(_round_trip(0, 0.0, 0.01, 2.0, 0.02))
        d = decompose(log)
        chunk = d.chunks[0]
        assert (chunk.t1, chunk.t2, chunk.t3) == pytest.approx((0.01, 2.0, 0.02))
        assert d.t_delay.median == pytest.approx(2.03)
        assert d.t_comm.median == pytest.approx(0.03)

    def test_incomplete_chunk(self):
        """A delivered chunk missing events is an error naming it."""
        log = _log(_round_trip(0, 0.0, 0.01, 1.0, 0.01) + [(1, "sent", 0.04)])
        with pytest.raises(IncompleteLog) as exc:
            decompose(log)
        assert exc.value.missing == [1]

    def test_dropped_chunks_skipped(self):
        """Dropped chunks do not need a full event set."""
        log = _log(_round_trip(0, 0.0, 0.01, 1.0, 0.01) + [(1, "sent", 0.04), (1, "dropped", 0.04)])
        assert [c.seq for c in decompose(log).chunks] == [0]

    def test_empty_stats(self):
        """No values give zeroed statistics."""
        assert latency_stats([]).max == 0.0


class TestGapReport:
    """Tests for playout gap counting."""

    def test_counts_late_chunks(self):
        """Only intervals over one chunk plus 1 ms count."""
        log = _log([(0, "played", 0.0), (1, "played", 0.0405), (2, "played", 0.1005)])
        gaps = gap_report(log)
        assert gaps.gap_count == 1
        assert gaps.gap_total == pytest.approx(0.02)

    def test_regular_playout(self):
        """Back-to-back chunks have no gaps."""
        log = _log([(n, "played", n * 0.04) for n in range(20)])
        assert gap_report(log).gap_count == 0

    def test_nothing_played(self):
        """Empty playback is its own error."""
        with pytest.raises(EmptyPlayback):
            gap_report(_log([(0, "captured", 0.0)]))


class TestFirstPlaybackDelay:
    """Tests for first_playback_delay."""

    def test_first_played_chunk(self):
        """Delay is measured from the first played chunk's capture."""
        rows = [(0, "captured", 0.0), (0, "played", 4.0), (1, "captured", 0.04), (1, "played", 4.04),
                (1, "enhanced", 0.0)]
        log = _log(rows)
        assert first_playback_delay(log) == pytest.approx(4.0)
        assert first_playback_delay(log, enhanced_only=True) == pytest.approx(4.0)

    def test_no_enhanced_chunk(self):
        """Without enhanced chunks there is no enhanced delay."""
        log = _log([(0, "captured", 0.0), (0, "played", 1.0)])
        assert first_playback_delay(log, enhanced_only=True) is None


class TestQuality:
    """Tests for the SNR quality report."""

    def test_perfect_enhancement(self, rng):
        """Returning the clean signal gives infinite output SNR."""
        clean = rng.standard_normal(1000)
        q = quality(clean, clean + 0.1 * rng.standard_normal(1000), clean)
        assert np.isinf(q.output_snr)

    def test_identity_has_no_improvement(self, rng):
        """Passing the mixture through changes nothing."""
        clean = rng.standard_normal(1000)
        noisy = clean + rng.standard_normal(1000)
        assert quality(clean, noisy, noisy).snr_improvement == pytest.approx(0.0)

    def test_length_mismatch(self):
        """All three signals must be the same length."""
        with pytest.raises(InvalidInput):
            quality(np.ones(10), np.ones(10), np.ones(9))


class TestRunReport:
    """Tests for build_report on a simulated run."""

    def test_short_session_report(self, short_config, short_source):
        """A clean ethernet run is coherent and fully played."""
        report = build_report(run_simulation(short_config, 3.0, source=short_source))
        assert report.coherent
        assert report.captured == report.played == short_source.n_chunks
        assert report.dropped == 0
        assert report.quality is not None
        assert report.payload_bytes > 0
        assert report.first_playback_delay < report.t_delay.max + 0.1

    def test_plots_written(self, short_config, short_source, tmp_path, rng):
        """Histogram, heatmap and grid CSV land on disk."""
        report = build_report(run_simulation(short_config, 3.0, source=short_source))
        spec = stft(rng.standard_normal(4000))
        assert latency_histogram(report, tmp_path / "hist.png").stat().st_size > 0
        assert spectrogram_heatmap(spec, tmp_path / "spec.png", "noise").stat().st_size > 0
        grid = write_grid_csv(spec.magnitude, tmp_path / "grid.csv")
        assert np.loadtxt(grid, delimiter=",").shape == spec.magnitude.shape
