"""
Deterministic scene generator used for tests, sweeps and pipeline runs.

Speech is a harmonic stand-in: a drifting fundamental with a handful of
harmonics, gated into syllables grouped in words separated by pauses.
Impulse responses are exponentially decaying noise sequences split at the
configured boundary. Noise tracks are stationary coloured Gaussian noise.
"""
import logging
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from src.config.constants import MIXTURE_PEAK
from src.models.inputs import SceneParams
from src.scene.signals import AcousticScene, ImpulseResponsePair, Signal, clean_sum, mix, render_interference
from src.utils.errors import InvalidInput

logger = logging.getLogger(__name__)

N_HARMONICS = 8
SYLLABLE_RANGE_S = (0.12, 0.25)
PAUSE_RANGE_S = (0.10, 0.40)
SYLLABLES_PER_WORD = (2, 4)


def _envelope(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    env = np.zeros(n)
    pos = int(rng.uniform(*PAUSE_RANGE_S) * sr)
    while pos < n:
        for _ in range(int(rng.integers(SYLLABLES_PER_WORD[0], SYLLABLES_PER_WORD[1] + 1))):
            length = int(rng.uniform(*SYLLABLE_RANGE_S) * sr)
            stop = min(pos + length, n)
            if stop <= pos:
                break
            env[pos:stop] = np.sin(np.pi * np.arange(stop - pos) / length) * rng.uniform(0.6, 1.0)
            pos = stop
        pos += int(rng.uniform(*PAUSE_RANGE_S) * sr)
    return env


def synth_speech(n: int, sr: int, f0_range: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """Amplitude-modulated harmonic series standing in for a talker."""
    t = np.arange(n) / sr
    f0_lo, f0_hi = f0_range
    centre = rng.uniform(f0_lo, f0_hi)
    drift = (f0_hi - f0_lo) * 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 0.8) * t + rng.uniform(0, 2 * np.pi))
    f0 = np.clip(centre + drift, f0_lo, f0_hi)
    phase = 2 * np.pi * np.cumsum(f0) / sr
    voice = np.zeros(n)
    for k in range(1, N_HARMONICS + 1):
        if k * f0_hi >= sr / 2:
            break
        voice += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    return voice * _envelope(n, sr, rng)


def synth_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary noise through a random one-pole lowpass."""
    pole = rng.uniform(0.0, 0.9)
    return lfilter([1.0 - pole], [1.0, -pole], rng.standard_normal(n))


def synth_ir(params: SceneParams, rng: np.random.Generator) -> ImpulseResponsePair:
    sr = params.sample_rate
    length = max(2, int(round(params.ir_length_s * sr)))
    boundary = min(max(1, int(round(params.boundary_s * sr))), length - 1)
    k = np.arange(length)

    early = np.zeros(length)
    early[:boundary] = rng.standard_normal(boundary) * 0.3 * np.exp(-k[:boundary] / (params.early_decay_s * sr))
    early[0] = 1.0

    late = np.zeros(length)
    if params.late_energy_ratio > 0:
        late[boundary:] = rng.standard_normal(length - boundary) * np.exp(
            -(k[boundary:] - boundary) / (params.late_decay_s * sr)
        )
        late *= np.sqrt(params.late_energy_ratio * np.sum(early ** 2) / np.sum(late ** 2))
    return ImpulseResponsePair(early, late, boundary)


def _load_sources(params: SceneParams, n: int) -> list[np.ndarray]:
    from src.scene.io import read_wav

    loaded = []
    for path in params.source_files[: params.n_targets]:
        signal = read_wav(path)
        if signal.sample_rate != params.sample_rate:
            raise InvalidInput(f"{path} is {signal.sample_rate} Hz, scene expects {params.sample_rate} Hz")
        data = signal.samples[:n]
        loaded.append(np.pad(data, (0, n - data.size)))
    return loaded


def _noise_gain(late: np.ndarray, noise: np.ndarray, target_power: float) -> Optional[float]:
    """Non-negative g with |late + g*noise|^2 == target_power, if one exists."""
    a = float(noise @ noise)
    b = 2.0 * float(late @ noise)
    c = float(late @ late) - target_power
    if a == 0.0:
        return None
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    g = (-b + np.sqrt(disc)) / (2 * a)
    return g if g >= 0 else None


def synth_scene(params: SceneParams, seed: Optional[int] = None) -> AcousticScene:
    """
    Build a reproducible scene.

    Args:
        params: Scene parameters
        seed: Overrides params.seed when given

    Returns:
        AcousticScene whose mixture is scaled to a fixed peak and, when
        target_snr_db is set, hits that input SNR

    Raises:
        InvalidInput: Zero-length scenes or unreadable source files
    """
    seed = params.seed if seed is None else seed
    sr = params.sample_rate
    n = int(round(params.duration_s * sr))
    if n < 1:
        raise InvalidInput("Scene duration must cover at least one sample")
    rng = np.random.default_rng(seed)

    dry = _load_sources(params, n)
    while len(dry) < params.n_targets:
        dry.append(synth_speech(n, sr, (params.f0_min_hz, params.f0_max_hz), rng))
    irs = [synth_ir(params, rng) for _ in range(params.n_targets)]
    noises = [synth_noise(n, rng) for _ in range(params.n_noises)]

    sources = [(Signal(x, sr), ir) for x, ir in zip(dry, irs)]
    scene = AcousticScene(sources, [Signal(x, sr) for x in noises], seed)

    if params.target_snr_db is not None:
        scene = _rescale_to_snr(scene, params.target_snr_db)

    mixture, _, _ = mix(scene)
    peak = float(np.max(np.abs(mixture.samples)))
    if peak > 0:
        factor = MIXTURE_PEAK / peak
        scene = AcousticScene(
            [(s.scaled(factor), ir) for s, ir in scene.sources],
            [nz.scaled(factor) for nz in scene.noises],
            seed,
        )
    logger.debug(f"Synthesized scene seed={seed} T={params.n_targets} N={params.n_noises} {params.duration_s}s")
    return scene


def _rescale_to_snr(scene: AcousticScene, target_db: float) -> AcousticScene:
    """Scale noise tracks (or, failing that, all interference) to the target input SNR."""
    _, refs, _ = mix(scene)
    clean = clean_sum(refs).samples
    target_power = float(clean @ clean) / 10 ** (target_db / 10)
    if target_power == 0.0:
        return scene

    late_only = AcousticScene(scene.sources, [], scene.seed)
    late = render_interference(late_only).samples
    noise = np.zeros(scene.length)
    for track in scene.noises:
        noise[: len(track)] += track.samples

    g = _noise_gain(late, noise, target_power)
    if g is not None:
        return AcousticScene(scene.sources, [nz.scaled(g) for nz in scene.noises], scene.seed)

    total = late + noise
    power = float(total @ total)
    if power == 0.0:
        logger.warning("Scene has no interference; target SNR cannot be met")
        return scene
    common = np.sqrt(target_power / power)
    return AcousticScene(
        [(s, ir.scaled_late(common)) for s, ir in scene.sources],
        [nz.scaled(common) for nz in scene.noises],
        scene.seed,
    )
