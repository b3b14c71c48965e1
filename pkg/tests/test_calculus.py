"""
Tests for the buffering calculus: delay and coherence laws, config
validation, the startup skip and the window/release schedule.
"""
import warnings

import pytest

from src.models.inputs import ChannelModel, EnhancerSpec, PipelineConfig
from src.pipeline.calculus import (
    apply_startup_skip,
    coherent,
    plan_schedule,
    plan_windows,
    processing_latency,
    resolve_channel,
    resolve_enhancer,
    total_delay,
    validate_config,
    window_seconds,
)
from src.utils.errors import CoherenceWarning, ConfigError, InvalidInput


class TestLaws:
    """Tests for total_delay and coherent."""

    def test_total_delay_sums_terms(self):
        """Communication, buffer interval and algorithm time add up."""
        assert total_delay(0.01, 2.35, 2.2) == pytest.approx(4.56)

    def test_coherence_is_inclusive(self):
        """A round trip of exactly one chunk is still coherent."""
        assert coherent(0.040, 0.040)
        assert not coherent(0.0401, 0.040)

    def test_coherence_needs_positive_chunk(self):
        """t_chunk must be positive."""
        with pytest.raises(InvalidInput):
            coherent(0.01, 0.0)


class TestValidateConfig:
    """Tests for validate_config."""

    def test_default_config_is_valid(self, default_config):
        """The default 10 s / 2.35 s / 2.2 s setup passes."""
        assert validate_config(default_config) is default_config

    def test_interval_must_exceed_latency(self):
        """t_delta <= t_a is rejected."""
        with pytest.raises(ConfigError):
            validate_config({"t_delta": 2.2})

    def test_structural_errors_become_config_errors(self):
        """Pydantic failures surface as ConfigError."""
        with pytest.raises(ConfigError):
            validate_config({"t_i": -1.0})

    def test_window_shorter_than_chunk(self):
        """t_i below t_chunk is rejected."""
        with pytest.raises(ConfigError):
            validate_config({"t_i": 0.01, "t_delta": 0.5, "enhancer": {"kind": "passthrough"}})

    def test_visual_gate_needs_video(self):
        """visual_gated with audio_only is inconsistent."""
        with pytest.raises(ConfigError):
            validate_config({"enhancer": {"kind": "visual_gated"}, "audio_only": True})

    def test_incoherent_channel_warns(self):
        """A raw chunk over wifi4 cannot round-trip in 40 ms."""
        with pytest.warns(CoherenceWarning):
            validate_config(PipelineConfig(channel="wifi4"))

    def test_coherent_channel_is_quiet(self, default_config):
        """Ethernet raises no coherence warning."""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            validate_config(default_config)
        assert not [w for w in caught if issubclass(w.category, CoherenceWarning)]

    def test_compression_restores_coherence(self):
        """Quality 80 brings wifi4 back under one chunk."""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            validate_config(PipelineConfig(channel="wifi4", quality=80))
        assert not [w for w in caught if issubclass(w.category, CoherenceWarning)]


class TestProfiles:
    """Tests for cloud, edge and local profile resolution."""

    def test_local_profile_uses_loopback(self):
        """Local processing has no network."""
        ch = resolve_channel(PipelineConfig(profile="local", channel="4g"))
        assert ch.name == "local"
        assert ch.base_one_way_ms == 0.0

    def test_cloud_profile_keeps_channel(self):
        """Cloud runs use the configured link."""
        assert resolve_channel(PipelineConfig(channel="4g")).name == "4g"

    def test_device_slowdown_scales_latency(self):
        """A slower device multiplies t_a."""
        cfg = PipelineConfig(profile="local", device_slowdown=2.0,
                             enhancer=EnhancerSpec(kind="emulated", t_a=0.5))
        assert resolve_enhancer(cfg).t_a == pytest.approx(1.0)

    def test_slowdown_ignored_off_device(self):
        """Slowdown only applies to the local profile."""
        cfg = PipelineConfig(device_slowdown=2.0)
        assert resolve_enhancer(cfg).t_a == pytest.approx(2.2)

    def test_processing_latency_on_window(self, short_config):
        """Emulated latency is quoted on the pipeline window."""
        assert window_seconds(short_config) == 2.0
        assert processing_latency(short_config) == pytest.approx(0.5)


class TestStartupSkip:
    """Tests for apply_startup_skip."""

    def test_default_skip(self, default_config):
        """The first t_i - t_delta seconds bypass the enhancer."""
        skip = apply_startup_skip(default_config)
        assert skip.active
        assert skip.skip_s == pytest.approx(7.65)
        assert skip.first_enhanced_s == pytest.approx(7.65)

    def test_disabled(self):
        """startup_skip=False is a no-op."""
        assert not apply_startup_skip(PipelineConfig(startup_skip=False)).active

    def test_no_skip_when_window_not_longer(self):
        """With t_i <= t_delta there is nothing to skip."""
        cfg = PipelineConfig(t_i=1.0, t_delta=1.5, enhancer=EnhancerSpec(kind="emulated", t_a=0.5))
        assert apply_startup_skip(cfg).skip_s == 0.0


class TestSchedule:
    """Tests for plan_windows and plan_schedule on the default config."""

    def test_window_geometry(self, default_config):
        """Samples per chunk, window, step and skip."""
        plan = plan_windows(default_config)
        assert plan.chunk_samples == 640
        assert plan.window_samples == 160_000
        assert plan.step_samples == 37_600
        assert plan.skip_samples == 122_400

    def test_first_window(self, default_config):
        """Window 0 needs chunk 249 and keeps output from chunk 191."""
        plan = plan_windows(default_config)
        assert plan.trigger_chunk(0) == 249
        assert plan.keep_start(0) == 122_400
        assert plan.first_kept_chunk(0) == 191

    def test_windows_tile_the_output(self, default_config):
        """Each window keeps exactly where the previous one ended."""
        plan = plan_windows(default_config)
        for k in range(1, 20):
            assert plan.keep_start(k) == plan.end(k - 1)

    def test_default_schedule_constants(self, default_config):
        """Offset, margin, lead, jitter allowance and hold."""
        s = plan_schedule(default_config)
        assert s.worker_offset_us == 9_990_000
        assert s.margin_us == 20_000
        assert s.lead_us == 2_350_000
        assert s.processing_us == 2_200_000
        assert s.jitter_fwd_us == 224
        assert s.hold_us == 4_570_224

    def test_hold_without_skip(self):
        """Without the skip the whole window leads the output."""
        s = plan_schedule(PipelineConfig(startup_skip=False))
        assert s.lead_us == 10_000_000
        assert s.hold_us == 12_220_224

    def test_worker_cadence_is_exactly_t_delta(self, default_config):
        """Steady-state window starts are t_delta apart."""
        s = plan_schedule(default_config)
        starts = [s.worker_slot_us(k) for k in range(50)]
        assert {b - a for a, b in zip(starts, starts[1:])} == {2_350_000}

    def test_worker_never_outruns_arrivals(self, default_config):
        """Window k starts no earlier than its last chunk arrives."""
        s = plan_schedule(default_config)
        for k in range(200):
            assert s.worker_slot_us(k) >= s.plan.trigger_chunk(k) * s.t_chunk_us

    def test_release_slots(self, default_config):
        """Chunk n is released hold + n * t_chunk after chunk 0 arrives."""
        s = plan_schedule(default_config)
        assert s.release_slot_us(10) == 4_570_224 + 400_000

    def test_every_release_has_its_audio(self, default_config):
        """The window producing chunk n finishes before n's release slot."""
        s = plan_schedule(default_config)
        plan = s.plan
        for k in range(1, 100):
            done = s.worker_slot_us(k) + s.processing_us
            first = plan.first_kept_chunk(k)
            assert done <= s.release_slot_us(first) - s.jitter_fwd_us

    def test_threshold_overrides_hold(self):
        """output_start_threshold replaces the computed hold."""
        assert plan_schedule(PipelineConfig(output_start_threshold=5.0)).hold_us == 5_000_000

    def test_output_starts_after_t_delta_of_audio(self, default_config, short_config):
        """By default the first release waits for t_delta of complete chunks, rounded up."""
        assert plan_schedule(default_config).start_chunks == 59
        assert plan_schedule(short_config).start_chunks == 20

    def test_threshold_sets_start_chunks(self):
        """output_start_threshold replaces t_delta as the start level."""
        assert plan_schedule(PipelineConfig(output_start_threshold=5.0)).start_chunks == 125

    def test_quiet_channel_has_no_jitter_slack(self, quiet_channel):
        """Without jitter the hold loses the allowance."""
        s = plan_schedule(PipelineConfig(channel=quiet_channel))
        assert s.jitter_fwd_us == 0
        assert s.hold_us == 4_570_000
        assert not s.lossy

    def test_lossy_channel_flagged(self):
        """Channels with loss arm the acknowledgement timeout."""
        s = plan_schedule(PipelineConfig(channel=ChannelModel(preset="ethernet", loss_rate=0.01)))
        assert s.lossy
        assert s.ack_timeout_us == 500_000
