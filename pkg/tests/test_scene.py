"""
Tests for signals, the mixture model, scene synthesis, video and WAV I/O.
"""
import numpy as np
import pytest

from src.config.constants import SNR_TOLERANCE_DB
from src.models.inputs import SceneParams
from src.scene.io import from_pcm, read_frames, read_wav, to_pcm, write_frames, write_wav
from src.scene.signals import (
    AcousticScene,
    ImpulseResponsePair,
    Signal,
    clean_sum,
    convolve,
    mix,
    snr_db,
)
from src.scene.synth import synth_scene
from src.scene.video import face_frame, mouth_openings, quantize_opening, render_video
from src.utils.errors import InvalidInput, UndefinedMetric


def brute_force_mixture(scene: AcousticScene) -> np.ndarray:
    """Double-loop sum of every source through early + late response, plus noise.

    Each source contributes over its own length only.
    """
    out = np.zeros(scene.length)
    for source, ir in scene.sources:
        x = source.samples
        h = ir.early + ir.late
        for k in range(x.size):
            acc = 0.0
            for j in range(min(k + 1, h.size)):
                if k - j < x.size:
                    acc += h[j] * x[k - j]
            out[k] += acc
    for noise in scene.noises:
        out[: len(noise)] += noise.samples
    return out


def random_scene(seed: int) -> AcousticScene:
    rng = np.random.default_rng(seed)
    n_targets = int(rng.integers(1, 4))
    n_noises = int(rng.integers(0, 3))
    sources = []
    for _ in range(n_targets):
        length = int(rng.integers(20, 120))
        taps = int(rng.integers(4, 30))
        boundary = int(rng.integers(1, taps))
        ir = ImpulseResponsePair.split(rng.standard_normal(taps), boundary)
        sources.append((Signal(rng.standard_normal(length)), ir))
    noises = [Signal(rng.standard_normal(int(rng.integers(20, 120)))) for _ in range(n_noises)]
    return AcousticScene(sources, noises, seed)


class TestSignal:
    """Tests for the Signal value type."""

    def test_rejects_non_finite_samples(self):
        """NaN samples are refused."""
        with pytest.raises(InvalidInput):
            Signal(np.array([0.0, np.nan]))

    def test_rejects_non_positive_rate(self):
        """Sample rate must be positive."""
        with pytest.raises(InvalidInput):
            Signal(np.zeros(4), 0)

    def test_padded_extends_with_zeros(self):
        """Padding appends silence and keeps the rate."""
        padded = Signal(np.ones(3), 8000).padded(5)
        assert padded.samples.tolist() == [1, 1, 1, 0, 0]
        assert padded.sample_rate == 8000


class TestImpulseResponsePair:
    """Tests for early/late impulse response validation."""

    def test_split_partitions_response(self):
        """Early and late parts sum back to the full response."""
        h = np.arange(1.0, 9.0)
        pair = ImpulseResponsePair.split(h, 3)
        assert np.array_equal(pair.early + pair.late, h)
        assert np.all(pair.early[3:] == 0)
        assert np.all(pair.late[:3] == 0)

    def test_early_taps_after_boundary_rejected(self):
        """An early response may not reach past the boundary."""
        with pytest.raises(InvalidInput):
            ImpulseResponsePair(np.array([1.0, 0.5, 0.2]), np.zeros(3), 1)

    def test_empty_response_rejected(self):
        """Empty responses are invalid."""
        with pytest.raises(InvalidInput):
            ImpulseResponsePair(np.array([]), np.array([0.0]), 0)


class TestConvolve:
    """Tests for linear convolution."""

    def test_truncates_to_input_length(self):
        """Default output keeps len(x) samples."""
        out = convolve(np.array([1.0, 2.0, 3.0]), [1.0, 1.0])
        assert out.samples.tolist() == [1.0, 3.0, 5.0]

    def test_full_mode(self):
        """full=True returns len(x) + len(h) - 1 samples."""
        out = convolve(np.array([1.0, 2.0, 3.0]), [1.0, 1.0], full=True)
        assert out.samples.tolist() == [1.0, 3.0, 5.0, 3.0]

    def test_empty_input_rejected(self):
        """Empty x or h raise InvalidInput."""
        with pytest.raises(InvalidInput):
            convolve(np.array([1.0]), [])


class TestMix:
    """Tests for the mixture model."""

    def test_matches_brute_force_on_random_scenes(self):
        """mix() equals the double-loop oracle on 100 seeded random scenes."""
        for seed in range(100):
            scene = random_scene(seed)
            mixture, _, _ = mix(scene)
            expected = brute_force_mixture(scene)
            scale = max(1.0, float(np.max(np.abs(expected))))
            assert np.max(np.abs(mixture.samples - expected)) / scale < 1e-9, f"seed {seed}"

    def test_identity_response_without_noise(self):
        """A unit early response and no noise give mixture == source."""
        x = Signal(np.array([0.5, -0.25, 0.125, 0.0]))
        mixture, refs, interference = mix(AcousticScene([(x, ImpulseResponsePair.identity())]))
        assert np.allclose(mixture.samples, x.samples)
        assert np.allclose(refs[0].samples, x.samples)
        assert np.allclose(interference.samples, 0.0)

    def test_decomposition_sums_to_mixture(self):
        """Clean references plus interference reproduce the mixture."""
        scene = random_scene(3)
        mixture, refs, interference = mix(scene)
        assert np.allclose(clean_sum(refs).samples + interference.samples, mixture.samples)

    def test_decomposition_on_random_scenes(self):
        """References plus interference match the mixture on 50 random scenes."""
        for seed in range(50):
            mixture, refs, interference = mix(random_scene(seed))
            assert np.allclose(clean_sum(refs).samples + interference.samples, mixture.samples), f"seed {seed}"

    def test_linear_in_every_signal(self):
        """Scaling all signals scales the mixture, and summing sources sums mixtures."""
        for seed in range(30):
            scene = random_scene(seed)
            rng = np.random.default_rng(seed + 1000)
            scaled = AcousticScene(
                [(s.scaled(2.5), ir) for s, ir in scene.sources],
                [nz.scaled(2.5) for nz in scene.noises],
            )
            assert np.allclose(mix(scaled)[0].samples, 2.5 * mix(scene)[0].samples), f"seed {seed}"

            other = [Signal(rng.standard_normal(len(s))) for s, _ in scene.sources]
            summed = AcousticScene(
                [(Signal(s.samples + o.samples), ir) for (s, ir), o in zip(scene.sources, other)],
                scene.noises,
            )
            alone = AcousticScene([(o, ir) for (_, ir), o in zip(scene.sources, other)])
            base = mix(scene)[0]
            expected = base.samples + mix(alone)[0].padded(len(base)).samples
            assert np.allclose(mix(summed)[0].samples, expected), f"seed {seed}"

    def test_noise_scaling_moves_only_interference(self):
        """Scaling the noise tracks leaves the clean references untouched."""
        scene = random_scene(4)
        louder = AcousticScene(scene.sources, [nz.scaled(3.0) for nz in scene.noises])
        _, refs, interference = mix(scene)
        _, refs_louder, interference_louder = mix(louder)
        assert np.allclose(clean_sum(refs).samples, clean_sum(refs_louder).samples)
        noise = np.zeros(scene.length)
        for track in scene.noises:
            noise[: len(track)] += track.samples
        assert np.allclose(interference_louder.samples - interference.samples, 2.0 * noise)

    def test_mixed_sample_rates_rejected(self):
        """Sources at different rates cannot be mixed."""
        ir = ImpulseResponsePair.identity()
        scene = AcousticScene([(Signal(np.ones(4), 16000), ir), (Signal(np.ones(4), 8000), ir)])
        with pytest.raises(InvalidInput):
            mix(scene)


class TestSnr:
    """Tests for snr_db."""

    def test_identical_signals_are_infinite(self):
        """Zero error gives +inf."""
        x = np.array([1.0, -1.0, 0.5])
        assert snr_db(x, x) == float("inf")

    def test_known_value(self):
        """Error at one tenth of the amplitude is 20 dB."""
        x = np.ones(100)
        assert snr_db(x, x * 1.1) == pytest.approx(20.0)

    def test_zero_reference_undefined(self):
        """An all-zero reference has no SNR."""
        with pytest.raises(UndefinedMetric):
            snr_db(np.zeros(4), np.ones(4))

    def test_length_mismatch(self):
        """Lengths must agree."""
        with pytest.raises(InvalidInput):
            snr_db(np.ones(4), np.ones(5))


class TestSynthScene:
    """Tests for the deterministic scene generator."""

    def test_same_seed_same_scene(self, small_scene_params):
        """Two builds with one seed produce identical mixtures."""
        a, _, _ = mix(synth_scene(small_scene_params))
        b, _, _ = mix(synth_scene(small_scene_params))
        assert np.array_equal(a.samples, b.samples)

    def test_different_seed_different_scene(self, small_scene_params):
        """The seed argument overrides params.seed."""
        a, _, _ = mix(synth_scene(small_scene_params, seed=1))
        b, _, _ = mix(synth_scene(small_scene_params, seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_hits_target_snr(self, small_scene_params):
        """Input SNR lands on target_snr_db."""
        params = small_scene_params.model_copy(update={"target_snr_db": 5.0})
        mixture, refs, _ = mix(synth_scene(params))
        assert abs(snr_db(clean_sum(refs), mixture) - 5.0) < SNR_TOLERANCE_DB

    def test_mixture_within_full_scale(self, small_scene_params):
        """Mixtures are scaled below clipping."""
        mixture, _, _ = mix(synth_scene(small_scene_params))
        assert np.max(np.abs(mixture.samples)) <= 0.9 + 1e-9

    def test_counts_and_length(self):
        """Target and noise counts follow the params."""
        params = SceneParams(n_targets=2, n_noises=2, duration_s=0.5)
        scene = synth_scene(params)
        assert len(scene.sources) == 2
        assert len(scene.noises) == 2
        assert scene.length == 8000

    def test_zero_duration_rejected(self):
        """A scene needs at least one sample."""
        with pytest.raises(InvalidInput):
            synth_scene(SceneParams(duration_s=0.0))

    def test_source_files_replace_synthetic_speech(self, tmp_path):
        """A WAV listed in source_files becomes the dry target."""
        tone = 0.3 * np.sin(2 * np.pi * 220 * np.arange(16000) / 16000)
        path = write_wav(tmp_path / "talker.wav", Signal(tone))
        params = SceneParams(n_noises=0, duration_s=1.0, target_snr_db=None, source_files=[str(path)])
        scene = synth_scene(params)
        dry = scene.sources[0][0].samples
        assert np.corrcoef(dry, from_pcm(to_pcm(tone)))[0, 1] > 0.999


class TestVideo:
    """Tests for the synthetic talking face."""

    def test_frame_geometry(self, sample_frame):
        """Default frames are 640x380 grayscale."""
        assert (sample_frame.width, sample_frame.height) == (640, 380)
        assert sample_frame.pixels.dtype == np.uint8

    def test_mouth_region_changes_with_opening(self):
        """Opening the mouth darkens the ROI."""
        closed = face_frame(0.0).pixels[250:290, 280:360].astype(float)
        opened = face_frame(1.0).pixels[250:290, 280:360].astype(float)
        assert opened.mean() < closed.mean()

    def test_openings_are_quantized(self):
        """Nearby openings render the same frame."""
        assert quantize_opening(0.50) == quantize_opening(0.52)
        assert face_frame(0.50) == face_frame(0.52)

    def test_mouth_openings_normalized(self, rng):
        """Openings follow the loudness envelope and peak at 1."""
        speech = np.concatenate([np.zeros(1600), rng.standard_normal(1600)])
        openings = mouth_openings(speech, 5, 16000, 25)
        assert openings.max() == pytest.approx(1.0)
        assert openings[0] == 0.0
        assert np.all((openings >= 0) & (openings <= 1))

    def test_render_video_one_frame_per_opening(self):
        """render_video maps openings to frames."""
        assert len(render_video(np.array([0.0, 0.5, 1.0]))) == 3


class TestIo:
    """Tests for WAV and frame-stack files."""

    def test_wav_round_trip_at_pcm_precision(self, tmp_path, rng):
        """Written and re-read audio agrees to one PCM step."""
        x = Signal(rng.uniform(-0.9, 0.9, 800))
        back = read_wav(write_wav(tmp_path / "x.wav", x))
        assert back.sample_rate == x.sample_rate
        assert np.max(np.abs(back.samples - x.samples)) <= 1 / 32768

    def test_pcm_conversion_clips(self):
        """Out-of-range floats saturate."""
        assert to_pcm(np.array([2.0, -2.0])).tolist() == [32767, -32768]

    def test_frames_round_trip(self, tmp_path):
        """Frame stacks survive save and load."""
        frames = [face_frame(0.0), face_frame(1.0)]
        back = read_frames(write_frames(tmp_path / "frames.npy", frames))
        assert back == frames
