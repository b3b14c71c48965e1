"""
Tests for STFT analysis/synthesis, feature fusion, masks, footprints and enhancers.
"""
import numpy as np
import pytest

from src.config.constants import OVERSUBTRACTION
from src.dsp.enhancers import MediaWindow, effective_latency, enhance
from src.dsp.features import (
    FeatureMap,
    audio_features,
    broadcast_to,
    concat_fuse,
    lip_activity,
    split_fused,
    visual_features,
)
from src.dsp.masks import (
    apply_mask,
    estimate_noise_profile,
    oracle_mask,
    spectral_subtraction,
    subtraction_gain,
)
from src.dsp.params import count_parameters, format_bytes, parameter_bytes, tier_footprint
from src.dsp.stft import interior, istft, stft
from src.metrics.quality import quality
from src.models.inputs import EnhancerSpec, Roi, SceneParams
from src.scene.signals import Signal, clean_sum, mix
from src.scene.synth import synth_scene
from src.scene.video import face_frame, mouth_openings, render_video
from src.utils.clock import SimClock
from src.utils.errors import InsufficientInput, InvalidInput, ShapeError


@pytest.fixture
def noisy_scene():
    """Two seconds, one talker, one noise track at 0 dB."""
    params = SceneParams(n_targets=1, n_noises=1, duration_s=2.0, target_snr_db=0.0, seed=11)
    mixture, refs, _ = mix(synth_scene(params))
    return mixture, clean_sum(refs)


class TestStft:
    """Tests for stft / istft."""

    def test_interior_reconstruction(self, rng):
        """Interior samples survive analysis and synthesis."""
        x = rng.uniform(-1, 1, 4000)
        y = istft(stft(x, 512, 256)).samples
        inner = interior(x)
        assert np.max(np.abs(y[inner] - x[inner])) < 1e-6

    def test_reconstruction_on_random_signals(self):
        """100 random signals of random length reconstruct in the interior."""
        rng = np.random.default_rng(100)
        for i in range(100):
            x = rng.uniform(-1, 1, int(rng.integers(1100, 8000)))
            y = istft(stft(x)).samples
            inner = interior(x)
            assert np.max(np.abs(y[inner] - x[inner])) < 1e-6, f"signal {i}"

    def test_bin_centred_tone_stays_in_its_bin(self):
        """A tone on bin 32 peaks there in every frame, with its main lobe holding the energy."""
        n = np.arange(4096)
        spec = stft(np.cos(2 * np.pi * 32 * n / 512), 512, 256)
        power = spec.magnitude ** 2
        assert np.all(np.argmax(power, axis=1) == 32)
        lobe = power[:, 31:34].sum(axis=1) / power.sum(axis=1)
        assert np.all(lobe > 0.95)

    def test_frame_and_bin_counts(self):
        """Frames advance by hop, bins cover fft_size // 2 + 1."""
        spec = stft(np.zeros(2048), 512, 256)
        assert spec.shape == (7, 257)
        assert spec.n_samples == 2048

    def test_short_signal_rejected(self):
        """Signals shorter than one window cannot be analysed."""
        with pytest.raises(InvalidInput):
            stft(np.zeros(100), 512, 256)

    def test_bad_hop_rejected(self):
        """hop must lie in (0, fft_size]."""
        with pytest.raises(InvalidInput):
            stft(np.zeros(1024), 512, 0)


class TestFeatures:
    """Tests for feature maps and concatenation fusion."""

    def test_two_dimensional_data_gains_channel_axis(self):
        """H x W arrays become H x W x 1."""
        assert FeatureMap(np.ones((3, 4))).shape == (3, 4, 1)

    def test_bad_shape_rejected(self):
        """One-dimensional data is not a feature map."""
        with pytest.raises(ShapeError):
            FeatureMap(np.ones(5))

    def test_fusion_interleaves_video_then_audio(self):
        """Channel 2d holds video d and 2d + 1 holds audio d."""
        audio = FeatureMap(np.full((2, 3, 2), 1.0) * np.array([10.0, 20.0]))
        video = FeatureMap(np.full((2, 3, 2), 1.0) * np.array([1.0, 2.0]))
        fused = concat_fuse(audio, video)
        assert fused.shape == (2, 3, 4)
        assert fused.data[0, 0].tolist() == [1.0, 10.0, 2.0, 20.0]

    def test_split_inverts_fusion(self, rng):
        """split_fused returns the original (audio, video)."""
        audio = FeatureMap(rng.standard_normal((4, 5, 3)))
        video = FeatureMap(rng.standard_normal((4, 5, 3)))
        a, v = split_fused(concat_fuse(audio, video))
        assert np.array_equal(a.data, audio.data)
        assert np.array_equal(v.data, video.data)

    def test_fusion_on_random_shapes(self):
        """Interleave and split hold for shapes up to 64 x 64 x 8."""
        rng = np.random.default_rng(64)
        for _ in range(30):
            h, w = (int(v) for v in rng.integers(1, 65, 2))
            d = int(rng.integers(1, 9))
            audio = FeatureMap(rng.standard_normal((h, w, d)))
            video = FeatureMap(rng.standard_normal((h, w, d)))
            fused = concat_fuse(audio, video)
            assert fused.shape == (h, w, 2 * d)
            assert np.array_equal(fused.data[:, :, 0::2], video.data)
            assert np.array_equal(fused.data[:, :, 1::2], audio.data)
            back_audio, back_video = split_fused(fused)
            assert np.array_equal(back_audio.data, audio.data)
            assert np.array_equal(back_video.data, video.data)

    def test_fusion_shape_mismatch(self):
        """Maps of different shapes cannot be fused."""
        with pytest.raises(ShapeError):
            concat_fuse(FeatureMap(np.ones((2, 2))), FeatureMap(np.ones((3, 2))))

    def test_broadcast_along_singletons(self):
        """A per-frame column repeats across bins."""
        out = broadcast_to(FeatureMap(np.arange(3.0)[:, None, None]), (3, 4, 1))
        assert out.shape == (3, 4, 1)
        assert out.data[2].ravel().tolist() == [2.0] * 4

    def test_broadcast_incompatible(self):
        """Non-singleton mismatches raise ShapeError."""
        with pytest.raises(ShapeError):
            broadcast_to(FeatureMap(np.ones((3, 2, 1))), (3, 4, 1))

    def test_audio_features_are_log_magnitude(self):
        """Silence maps to zeros."""
        feats = audio_features(stft(np.zeros(1024)))
        assert feats.shape == (3, 257, 1)
        assert np.all(feats.data == 0)

    def test_lip_activity_tracks_mouth_motion(self):
        """A moving mouth is active, a still one is not."""
        roi = Roi()
        still = lip_activity([face_frame(0.0)] * 3, roi)
        moving = lip_activity([face_frame(0.0), face_frame(1.0), face_frame(0.0)], roi)
        assert still.tolist() == [0.0, 0.0, 0.0]
        assert np.all(moving > 0)
        assert len(moving) == 3

    def test_lip_activity_needs_two_frames(self):
        """One frame has no motion."""
        with pytest.raises(InvalidInput):
            lip_activity([face_frame(0.0)], Roi())

    def test_visual_features_align_to_audio_frames(self):
        """With audio_frames the map has one row per STFT frame."""
        frames = [face_frame(o) for o in (0.0, 1.0, 0.0, 1.0)]
        feats = visual_features(frames, Roi(), audio_frames=9)
        assert feats.shape == (9, 1, 1)


class TestMasks:
    """Tests for oracle masks and spectral subtraction."""

    def test_oracle_mask_in_unit_range(self, noisy_scene):
        """Mask entries lie in [0, 1]."""
        mixture, clean = noisy_scene
        mask = oracle_mask(stft(clean), stft(mixture))
        assert mask.data.min() >= 0.0
        assert mask.data.max() <= 1.0

    def test_oracle_mask_improves_snr_by_10db(self, noisy_scene):
        """Applying the oracle mask to a 0 dB mixture gains at least 10 dB."""
        mixture, clean = noisy_scene
        mix_spec = stft(mixture)
        enhanced = apply_mask(mix_spec, oracle_mask(stft(clean), mix_spec))
        inner = interior(clean.samples)
        report = quality(clean.samples[inner], mixture.samples[inner], enhanced.samples[inner])
        assert report.snr_improvement >= 10.0

    def test_oracle_mask_shape_mismatch(self, rng):
        """Spectrograms of different lengths are rejected."""
        with pytest.raises(ShapeError):
            oracle_mask(stft(rng.standard_normal(2048)), stft(rng.standard_normal(4096)))

    def test_apply_mask_rejects_out_of_range(self):
        """Mask entries above one are invalid."""
        spec = stft(np.zeros(1024))
        with pytest.raises(InvalidInput):
            apply_mask(spec, np.full(spec.shape, 2.0))

    def test_apply_mask_never_adds_energy(self):
        """Masks in [0, 1] cannot make the resynthesized signal louder."""
        rng = np.random.default_rng(5)
        for i in range(20):
            x = rng.standard_normal(int(rng.integers(1024, 6000)))
            spec = stft(x)
            out = apply_mask(spec, rng.uniform(0, 1, spec.shape))
            assert np.sum(out.samples ** 2) <= np.sum(x ** 2) * (1 + 1e-9), f"signal {i}"

    def test_unit_mask_reconstructs(self, rng):
        """An all-ones mask gives back the interior of the input."""
        x = rng.standard_normal(5000)
        spec = stft(x)
        out = apply_mask(spec, np.ones(spec.shape)).samples
        inner = interior(x)
        assert np.max(np.abs(out[inner] - x[inner])) < 1e-6

    def test_noise_profile_picks_quietest_frames(self, rng):
        """The profile keeps the lowest-energy fifth of frames."""
        x = rng.standard_normal(256 * 21)
        x[: 256 * 6] *= 0.01
        spec = stft(x)
        profile = estimate_noise_profile(spec)
        assert profile.n_frames == 4
        assert np.mean(profile.magnitude) < 0.1 * np.mean(spec.magnitude)

    def test_subtraction_gain_bounds(self, noisy_scene):
        """Gains stay within [floor, 1]."""
        mixture, _ = noisy_scene
        spec = stft(mixture)
        gain = subtraction_gain(spec, estimate_noise_profile(spec))
        assert gain.min() >= 0.0
        assert gain.max() <= 1.0

    def test_spectral_subtraction_needs_profile(self, noisy_scene):
        """A missing profile raises InvalidInput."""
        mixture, _ = noisy_scene
        with pytest.raises(InvalidInput):
            spectral_subtraction(mixture, None)

    def test_spectral_subtraction_keeps_length(self, noisy_scene):
        """Output covers the analysed span of the mixture."""
        mixture, _ = noisy_scene
        out = spectral_subtraction(mixture, estimate_noise_profile(stft(mixture)))
        assert len(out) == len(mixture)

    def test_zero_profile_returns_mixture(self, noisy_scene):
        """Subtracting nothing leaves the mixture."""
        mixture, _ = noisy_scene
        spec = stft(mixture)
        profile = spec.with_values(np.zeros((4, spec.n_bins), dtype=complex))
        out = spectral_subtraction(mixture, profile)
        inner = interior(mixture.samples)
        assert np.max(np.abs(out.samples[inner] - mixture.samples[inner])) < 1e-6

    def test_default_is_plain_subtraction(self, noisy_scene):
        """The default oversubtraction factor is 1."""
        mixture, _ = noisy_scene
        profile = estimate_noise_profile(stft(mixture))
        assert OVERSUBTRACTION == 1.0
        assert EnhancerSpec().oversubtraction == 1.0
        assert np.array_equal(
            spectral_subtraction(mixture, profile).samples,
            spectral_subtraction(mixture, profile, oversubtraction=1.0).samples,
        )

    def test_pure_noise_is_mostly_removed(self):
        """Stationary noise with a matching profile keeps under 5% of its energy at factor 2."""
        rng = np.random.default_rng(8)
        noise = Signal(rng.standard_normal(32000))
        profile = stft(Signal(rng.standard_normal(32000)))
        inner = interior(noise.samples)
        energy = np.sum(noise.samples[inner] ** 2)
        plain = spectral_subtraction(noise, profile).samples[inner]
        doubled = spectral_subtraction(noise, profile, oversubtraction=2.0).samples[inner]
        assert np.sum(plain ** 2) < 0.25 * energy
        assert np.sum(doubled ** 2) < 0.05 * energy

    def test_tones_in_stationary_noise_improve(self):
        """Three tones in white noise at 0 dB come out with a higher SNR."""
        rng = np.random.default_rng(9)
        n = np.arange(32000)
        tones = sum(np.cos(2 * np.pi * k * n / 512 + p) for k, p in ((20, 0.3), (45, 1.1), (80, 2.0)))
        level = np.sqrt(np.mean(tones ** 2))
        mixture = Signal(tones + rng.standard_normal(n.size) * level)
        profile = stft(Signal(rng.standard_normal(n.size) * level))
        out = spectral_subtraction(mixture, profile).samples
        inner = interior(tones)
        report = quality(tones[inner], mixture.samples[inner], out[inner])
        assert report.snr_improvement > 3.0


class TestParams:
    """Tests for parameter counting and tier footprints."""

    def test_count_dense_stack(self):
        """(n_in + 1) * n_out summed over layers."""
        assert count_parameters([4, 3, 2]) == 5 * 3 + 4 * 2

    @pytest.mark.parametrize("layers,count", [([1], 0), ([2, 3], 9), ([10, 20, 5], 325)])
    def test_count_small_stacks(self, layers, count):
        """A single layer has no weights; each pair adds (n_in + 1) * n_out."""
        assert count_parameters(layers) == count

    def test_zero_width_layer_rejected(self):
        """Layer widths start at one."""
        with pytest.raises(InvalidInput):
            count_parameters([4, 0, 2])

    def test_empty_stack_rejected(self):
        """At least one layer is required."""
        with pytest.raises(InvalidInput):
            count_parameters([])

    def test_format_bytes(self):
        """Binary prefixes with two decimals."""
        assert format_bytes(512) == "512 B"
        assert format_bytes(parameter_bytes(202_564)) == "791.27 KB"

    @pytest.mark.parametrize(
        "tier,size",
        [("model_1", "5.88 MB"), ("model_2", "2.30 MB"), ("model_3", "791.27 KB")],
    )
    def test_tier_footprints(self, tier, size):
        """Tier sizes at four bytes per parameter."""
        assert tier_footprint(tier)["size"] == size

    def test_unknown_tier(self):
        """Unknown tiers raise InvalidInput."""
        with pytest.raises(InvalidInput):
            tier_footprint("model_9")


class TestEnhancers:
    """Tests for the enhance() entry point."""

    def _window(self, seconds: float, rng) -> MediaWindow:
        return MediaWindow(audio=rng.uniform(-0.5, 0.5, int(seconds * 16000)), sample_rate=16000)

    def test_emulated_latency_scales_with_window(self):
        """Tier latency is quoted on a 0.2 s window and scales linearly."""
        spec = EnhancerSpec(preset="model_1")
        assert effective_latency(spec, 0.2) == pytest.approx(1.20)
        assert effective_latency(spec, 0.4) == pytest.approx(2.40)

    def test_non_emulated_latency_is_fixed(self):
        """Other kinds charge t_a regardless of window length."""
        spec = EnhancerSpec(kind="spectral_subtraction", t_a=0.3)
        assert effective_latency(spec, 5.0) == 0.3

    def test_short_window_rejected(self, rng):
        """Windows shorter than t_i raise InsufficientInput."""
        spec = EnhancerSpec(kind="spectral_subtraction", t_i=1.0)
        with pytest.raises(InsufficientInput):
            enhance(self._window(0.5, rng), spec)

    def test_passthrough_exempt_from_window_check(self, rng):
        """Passthrough returns its input unchanged at any length."""
        window = self._window(0.1, rng)
        result = enhance(window, EnhancerSpec(kind="passthrough", t_i=1.0))
        assert np.array_equal(result.audio, window.audio)
        assert result.enhanced is False
        assert result.latency_s == 0.0

    def test_sim_clock_advanced_by_latency(self, rng):
        """A SimClock moves forward by the charged latency."""
        clock = SimClock(1000)
        spec = EnhancerSpec(kind="emulated", t_a=0.5, t_i=1.0)
        result = enhance(self._window(1.0, rng), spec, clock=clock)
        assert result.enhanced is True
        assert clock.now_us() == 1000 + 500_000

    def test_emulated_backend_shapes_output(self, rng):
        """Emulated tiers run their backend and keep the window length."""
        window = self._window(1.0, rng)
        spec = EnhancerSpec(kind="emulated", t_a=0.1, t_i=1.0, backend="spectral_subtraction")
        result = enhance(window, spec)
        assert result.audio.shape == window.audio.shape
        assert not np.array_equal(result.audio, window.audio)

    def test_oracle_needs_clean_reference(self, rng):
        """The oracle backend refuses to run blind."""
        with pytest.raises(InvalidInput):
            enhance(self._window(1.0, rng), EnhancerSpec(kind="oracle_mask", t_i=1.0))

    def test_oracle_window_improves_snr(self, noisy_scene):
        """The oracle enhancer cleans a buffered window."""
        mixture, clean = noisy_scene
        window = MediaWindow(audio=mixture.samples, sample_rate=16000)
        result = enhance(window, EnhancerSpec(kind="oracle_mask", t_i=2.0), oracle_ctx=clean.samples)
        report = quality(clean.samples, mixture.samples, result.audio)
        assert report.snr_improvement > 0

    def test_visual_gated_needs_frames(self, rng):
        """Without two frames and an ROI the visual gate cannot run."""
        with pytest.raises(InsufficientInput):
            enhance(self._window(1.0, rng), EnhancerSpec(kind="visual_gated", t_i=1.0))

    def test_visual_gated_runs_with_frames(self, rng):
        """With frames the gated output keeps the window length."""
        frames = [face_frame(o) for o in np.tile([0.0, 1.0], 13)]
        window = MediaWindow(
            audio=rng.uniform(-0.5, 0.5, 16000), sample_rate=16000, frames=frames, roi=Roi()
        )
        result = enhance(window, EnhancerSpec(kind="visual_gated", t_i=1.0))
        assert result.audio.shape == (16000,)
        assert np.all(np.isfinite(result.audio))

    def test_stft_keeps_sample_rate(self):
        """Spectrograms remember the rate of the analysed signal."""
        assert stft(Signal(np.zeros(1024), 8000)).sample_rate == 8000


class TestEnhancerCorpus:
    """Enhancers over a corpus of synthesized scenes."""

    @staticmethod
    def _scene(seed: int, snr_db: float, seconds: float = 2.0):
        params = SceneParams(n_targets=1, n_noises=1, duration_s=seconds, target_snr_db=snr_db, seed=seed)
        mixture, refs, _ = mix(synth_scene(params))
        return mixture.samples, clean_sum(refs).samples

    def test_oracle_gains_10db_on_nearly_every_scene(self):
        """At -5 dB input at least 48 of 50 scenes gain 10 dB or more."""
        spec = EnhancerSpec(kind="oracle_mask", t_i=2.0)
        gains = []
        for seed in range(50):
            mixture, clean = self._scene(seed, -5.0)
            window = MediaWindow(audio=mixture, sample_rate=16000)
            result = enhance(window, spec, oracle_ctx=clean)
            gains.append(quality(clean, mixture, result.audio).snr_improvement)
        passed = sum(g >= 10.0 for g in gains)
        assert passed >= 48, f"{passed}/50 scenes reached 10 dB, worst {min(gains):.2f} dB"

    def test_visual_gated_improves_on_average(self):
        """Gating by rendered lip motion raises the mean SNR over ten scenes."""
        spec = EnhancerSpec(kind="visual_gated", t_i=2.0)
        gains = []
        for seed in range(10):
            mixture, clean = self._scene(seed, 0.0)
            frames = render_video(mouth_openings(clean, 50))
            window = MediaWindow(audio=mixture, sample_rate=16000, frames=frames, roi=Roi())
            result = enhance(window, spec)
            gains.append(quality(clean, mixture, result.audio).snr_improvement)
        assert np.mean(gains) > 0.0
