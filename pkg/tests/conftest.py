"""
Shared fixtures and configuration for all tests.
"""
import numpy as np
import pytest

from src.models.inputs import ChannelModel, EnhancerSpec, PipelineConfig, SceneParams
from src.pipeline.media import build_media_source
from src.scene.video import face_frame


@pytest.fixture
def rng():
    """Seeded generator so random inputs are the same on every run."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_scene_params():
    """One target, one noise track, one second at 0 dB."""
    return SceneParams(n_targets=1, n_noises=1, duration_s=1.0, target_snr_db=0.0, seed=7)


@pytest.fixture
def default_config():
    """Ten-second window, 2.35 s interval, 2.2 s emulated model on ethernet."""
    return PipelineConfig()


@pytest.fixture
def quiet_channel():
    """Ethernet with jitter switched off, for exact timing assertions."""
    return ChannelModel(preset="ethernet", jitter_ms=0.0)


@pytest.fixture
def short_config():
    """Two-second window, 0.8 s interval, 0.5 s emulated model: fast end-to-end runs."""
    return PipelineConfig(
        t_i=2.0,
        t_delta=0.8,
        enhancer=EnhancerSpec(kind="emulated", t_a=0.5),
    )


@pytest.fixture
def short_source(short_config):
    """Three seconds of media for short_config."""
    return build_media_source(short_config, 3.0)


@pytest.fixture
def sample_frame():
    """Default-size synthetic face with the mouth half open."""
    return face_frame(0.5)
