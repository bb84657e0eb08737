"""
Reverberant two-speaker mixture rendering
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from config.settings import SAMPLE_RATE
from src.dsp.stft import MultiChannelWave
from src.train.example import TrainingExample
from src.utils.validators import Validators
from .rir import RirSet


@dataclass
class MixtureComponents:
    """Per-source reverberant images and the scaled noise image of one mixture"""
    images: np.ndarray  # (S, C, L)
    noise: np.ndarray  # (C, L)
    offsets: List[int]
    lengths: List[int]

    @property
    def speech(self) -> np.ndarray:
        return self.images.sum(axis=0)

    @property
    def mixture(self) -> np.ndarray:
        return self.speech + self.noise

    def activity(self) -> np.ndarray:
        """(S, L) flags: True while source k's dry utterance plays"""
        flags = np.zeros((self.images.shape[0], self.images.shape[2]), dtype=bool)
        for k, (offset, length) in enumerate(zip(self.offsets, self.lengths)):
            flags[k, offset:offset + length] = True
        return flags

    def spans(self) -> List[Tuple[int, int]]:
        return [(offset, offset + length) for offset, length in zip(self.offsets, self.lengths)]


def source_offsets(lengths: Sequence[int], overlap_ratio: float) -> List[int]:
    """
    Start samples of the two utterances

    The second starts so that the overlapped span is
    round(overlap_ratio * min(len1, len2)) samples.
    """
    Validators.validate_ratio(overlap_ratio, 'overlap_ratio')
    overlap = int(round(overlap_ratio * min(lengths)))
    return [0, lengths[0] - overlap]


def power(x: np.ndarray) -> float:
    return float(np.mean(np.asarray(x, dtype=np.float64) ** 2))


def render_components(
    utterances: Sequence[np.ndarray],
    rirs: RirSet,
    overlap_ratio: float,
    noise: Optional[np.ndarray] = None,
    noise_rir: Optional[np.ndarray] = None,
    snr_db: Optional[float] = None,
) -> MixtureComponents:
    """
    Convolve, offset and sum the sources, then add scaled noise

    Args:
        utterances: Two dry source signals
        rirs: Responses, C mics x 2 sources x taps
        overlap_ratio: Fraction of the shorter utterance spent in overlap
        noise: Dry noise signal, at least the mixture length; None for no noise
        noise_rir: Noise-position responses (C x taps)
        snr_db: Speech-to-noise power ratio over all channels

    Returns:
        MixtureComponents spanning max(end of each utterance) + taps - 1 samples
    """
    if len(utterances) != 2:
        raise ValueError(f"render_mixture needs 2 utterances, got {len(utterances)}")
    if rirs.num_sources < 2:
        raise ValueError(f"RirSet holds {rirs.num_sources} sources, need 2")

    lengths = [len(u) for u in utterances]
    offsets = source_offsets(lengths, overlap_ratio)
    span = max(o + n for o, n in zip(offsets, lengths))
    total = span + rirs.length - 1

    images = np.zeros((2, rirs.num_mics, total))
    for k, (utt, offset) in enumerate(zip(utterances, offsets)):
        wet = fftconvolve(np.asarray(utt, dtype=np.float64)[None, :], rirs.source(k), axes=-1)
        images[k, :, offset:offset + wet.shape[-1]] = wet

    noise_image = np.zeros((rirs.num_mics, total))
    if noise is not None and snr_db is not None:
        if noise_rir is None:
            raise ValueError("noise needs its own room response")
        if len(noise) < total:
            raise ValueError(f"noise has {len(noise)} samples, mixture needs {total}")
        wet = fftconvolve(np.asarray(noise[:total], dtype=np.float64)[None, :], noise_rir, axes=-1)
        noise_image = wet[:, :total]
        speech_power = power(images.sum(axis=0))
        noise_power = power(noise_image)
        if noise_power > 0:
            noise_image = noise_image * np.sqrt(speech_power / (noise_power * 10 ** (snr_db / 10)))

    return MixtureComponents(images, noise_image, offsets, lengths)


def render_mixture(
    utterances: Sequence[np.ndarray],
    rirs: RirSet,
    overlap_ratio: float,
    noise: Optional[np.ndarray] = None,
    noise_rir: Optional[np.ndarray] = None,
    snr_db: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    example_id: str = 'mix',
    metadata: Optional[Dict[str, Any]] = None,
    sample_rate: int = SAMPLE_RATE,
) -> TrainingExample:
    """
    Training example with channel-0 reverberant references

    When snr_db is given without a noise signal, white noise is drawn from rng.

    Returns:
        TrainingExample whose references are the channel-0 source images
    """
    if noise is None and snr_db is not None:
        if rng is None:
            raise ValueError("white noise needs an rng")
        lengths = [len(u) for u in utterances]
        offsets = source_offsets(lengths, overlap_ratio)
        total = max(o + n for o, n in zip(offsets, lengths)) + rirs.length - 1
        noise = rng.standard_normal(total)

    parts = render_components(utterances, rirs, overlap_ratio, noise, noise_rir, snr_db)
    meta = dict(metadata or {})
    meta.update({'overlap_ratio': overlap_ratio, 'snr_db': snr_db, 'spans': parts.spans()})
    return TrainingExample(
        example_id,
        MultiChannelWave(parts.mixture, sample_rate),
        parts.images[:, 0, :],
        meta,
        parts.activity(),
    )


def peak_normalize(example: TrainingExample, peak: float) -> Tuple[TrainingExample, float]:
    """Scale mixture and references together so the mixture peak is at most `peak`"""
    current = float(np.max(np.abs(example.mixture.samples)))
    if current <= peak or current == 0.0:
        return example, 1.0
    gain = peak / current
    scaled = TrainingExample(
        example.example_id,
        MultiChannelWave(example.mixture.samples * gain, example.mixture.sample_rate),
        example.references * gain,
        dict(example.metadata),
        example.activity,
    )
    return scaled, gain
