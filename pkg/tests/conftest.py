"""
Shared fixtures
"""
import numpy as np
import pytest

from src.dsp.stft import StftConfig
from src.graph.precision import precision
from src.model.config import ModelConfig
from src.model.network import build_network
from src.model.params import init_params
from src.simroom.mixture import render_mixture
from src.simroom.rir import RirSet
from src.simroom.sources import synthetic_utterance

TINY_SAMPLE_RATE = 16000


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test in 64-bit graph precision, restoring the previous mode"""
    with precision('float64'):
        yield


@pytest.fixture
def tiny_stft():
    return StftConfig(fft_size=128, hop=64, sample_rate=TINY_SAMPLE_RATE)


@pytest.fixture
def tiny_config(tiny_stft):
    return ModelConfig(num_blocks=2, feature_dim=tiny_stft.num_bins, embed_dim=8, num_heads=2, hidden_size=8)


@pytest.fixture
def tiny_net(tiny_config, float64):
    return build_network(tiny_config, init_params(tiny_config, np.random.default_rng(0)))


def make_example(rng, num_channels=4, seconds=0.25, taps=64, snr_db=15.0, overlap=0.5, example_id='tiny'):
    """Short two-speaker mixture with random decaying impulse responses"""
    utterances = [synthetic_utterance(rng, seconds, TINY_SAMPLE_RATE) for _ in range(2)]
    decay = np.exp(-np.arange(taps) / 12.0)
    responses = rng.standard_normal((num_channels, 3, taps)) * decay * 0.3
    responses[:, :, 0] += 1.0
    return render_mixture(
        utterances,
        RirSet(responses[:, :2], TINY_SAMPLE_RATE),
        overlap,
        noise_rir=responses[:, 2],
        snr_db=snr_db,
        rng=rng,
        example_id=example_id,
        sample_rate=TINY_SAMPLE_RATE,
    )


@pytest.fixture
def tiny_example(rng):
    return make_example(rng)
