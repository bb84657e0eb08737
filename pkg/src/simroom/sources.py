"""
Source-signal pools: WAV directories or synthetic speech-like signals
"""
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from scipy import signal

from config.settings import SAMPLE_RATE, UTTERANCE_SECONDS
from src.dsp.wavio import read_wav
from src.utils.errors import DataError

logger = logging.getLogger(__name__)

F0_RANGE = (90.0, 250.0)  # Hz
SYLLABLE_RATE = (3.0, 6.0)  # Hz
_MAX_HARMONIC_HZ = 4000.0


def synthetic_utterance(
    rng: np.random.Generator,
    seconds: float = UTTERANCE_SECONDS,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """
    Speech-like test signal

    A gliding harmonic series with a random fundamental, mixed with band-passed
    noise and shaped by a syllable-rate envelope with short pauses.

    Args:
        rng: Seeded generator
        seconds: Duration
        sample_rate: Hz

    Returns:
        Signal with unit RMS
    """
    length = int(round(seconds * sample_rate))
    t = np.arange(length) / sample_rate

    f0 = rng.uniform(*F0_RANGE)
    glide = 1.0 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 0.8) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * glide) / sample_rate
    num_harmonics = int(_MAX_HARMONIC_HZ // (f0 * 1.1))
    voiced = sum(
        np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h
        for h in range(1, num_harmonics + 1)
    )

    low = rng.uniform(300.0, 1000.0)
    high = min(rng.uniform(2000.0, 6000.0), 0.45 * sample_rate)
    sos = signal.butter(4, [low, high], btype='bandpass', fs=sample_rate, output='sos')
    noise = signal.sosfilt(sos, rng.standard_normal(length))
    noise *= np.std(voiced) / max(np.std(noise), 1e-12)

    rate = rng.uniform(*SYLLABLE_RATE)
    envelope = np.clip(np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)), 0.0, None) ** 0.7
    wave = envelope * (voiced + rng.uniform(0.1, 0.4) * noise)
    return wave / max(float(np.sqrt(np.mean(wave ** 2))), 1e-12)


def fit_length(wave: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Random crop, or zero-pad at the end, to exactly length samples"""
    if len(wave) >= length:
        start = int(rng.integers(0, len(wave) - length + 1))
        return wave[start:start + length]
    return np.concatenate([wave, np.zeros(length - len(wave))])


class SourcePool:
    """
    Draws utterances from a WAV directory, or synthesizes them when no
    directory is configured
    """

    def __init__(
        self,
        directory: Optional[Union[str, Path]] = None,
        seconds: float = UTTERANCE_SECONDS,
        sample_rate: int = SAMPLE_RATE,
    ):
        self.seconds = seconds
        self.sample_rate = sample_rate
        self.paths: List[Path] = []
        if directory is not None:
            directory = Path(directory)
            if not directory.is_dir():
                raise DataError(f"Source directory not found: {directory}")
            self.paths = sorted(directory.rglob('*.wav'))
            if not self.paths:
                raise DataError(f"No .wav files in {directory}")
            logger.info("Source pool: %d files from %s", len(self.paths), directory)

    @property
    def synthetic(self) -> bool:
        return not self.paths

    @property
    def length(self) -> int:
        return int(round(self.seconds * self.sample_rate))

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        """One utterance of `seconds` duration"""
        if self.synthetic:
            return synthetic_utterance(rng, self.seconds, self.sample_rate)
        path = self.paths[int(rng.integers(len(self.paths)))]
        samples, _ = read_wav(path, self.sample_rate)
        return fit_length(samples, self.length, rng)


class NoisePool(SourcePool):
    """Noise signals from a WAV directory, white noise by default"""

    def draw_length(self, rng: np.random.Generator, length: int) -> np.ndarray:
        if self.synthetic:
            return rng.standard_normal(length)
        path = self.paths[int(rng.integers(len(self.paths)))]
        samples, _ = read_wav(path, self.sample_rate)
        if len(samples) < length:
            samples = np.tile(samples, int(np.ceil(length / max(len(samples), 1))))
        return fit_length(samples, length, rng)
