"""
Reference-channel selection policies
"""
import logging
from typing import List, Literal, Optional, Tuple

import numpy as np

from config.settings import DIAGONAL_LOADING
from src.dsp.stft import ComplexSpectrogram, istft_array
from src.train.objectives import scale_allowing_sdr
from .beamformer import mvdr_weights, posterior_snr, spatial_covariances
from .masking import noise_mask

logger = logging.getLogger(__name__)

RefPolicy = Literal['max-snr', 'random', 'oracle']
POLICIES = ('max-snr', 'random', 'oracle')


def candidate_snrs(
    spec: ComplexSpectrogram,
    masks: np.ndarray,
    source: int,
    delta: float = DIAGONAL_LOADING,
) -> np.ndarray:
    """Posterior SNR of the MVDR output for every candidate reference channel"""
    cov = spatial_covariances(spec, masks[source], noise_mask(masks, source))
    return np.array([
        posterior_snr(mvdr_weights(cov, ref, delta), cov, delta)
        for ref in range(spec.num_channels)
    ])


def oracle_sdrs(
    spec: ComplexSpectrogram,
    mask: np.ndarray,
    reference: np.ndarray,
) -> np.ndarray:
    """SDR of each channel's TF-masked signal against a clean reference"""
    length = len(reference)
    masked = istft_array(mask[None] * spec.bins, spec.config, length)
    return np.array([scale_allowing_sdr(masked[c], reference) for c in range(spec.num_channels)])


def select_reference(
    spec: ComplexSpectrogram,
    masks: np.ndarray,
    policy: RefPolicy = 'max-snr',
    references: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    delta: float = DIAGONAL_LOADING,
) -> Tuple[List[int], List[Optional[np.ndarray]]]:
    """
    Reference channel per source

    Args:
        spec: Mixture spectrogram (C x T x F)
        masks: S x T x F masks
        policy: 'max-snr' (largest posterior SNR), 'random' (seeded uniform) or
            'oracle' (largest SDR of the TF-masked channel signal)
        references: Clean sources (S, L), required by 'oracle'
        rng: Generator for 'random'
        delta: Diagonal loading

    Returns:
        Tuple of (channel per source, per-channel posterior SNRs per source or
        None where not computed)
    """
    if policy not in POLICIES:
        raise ValueError(f"Unknown reference policy: {policy}")
    if policy == 'oracle' and references is None:
        raise ValueError("oracle reference selection needs the clean references")

    num_sources, num_channels = masks.shape[0], spec.num_channels
    if num_channels == 1:
        return [0] * num_sources, [None] * num_sources

    chosen, scores = [], []
    for k in range(num_sources):
        if policy == 'max-snr':
            snrs = candidate_snrs(spec, masks, k, delta)
            chosen.append(int(np.argmax(snrs)))
            scores.append(snrs)
        elif policy == 'random':
            generator = rng if rng is not None else np.random.default_rng(0)
            chosen.append(int(generator.integers(num_channels)))
            scores.append(None)
        else:
            sdrs = oracle_sdrs(spec, masks[k], references[k])
            chosen.append(int(np.argmax(sdrs)))
            scores.append(None)
    logger.debug("Reference channels (%s): %s", policy, chosen)
    return chosen, scores


def select_stream(
    spec: ComplexSpectrogram,
    per_channel_masks: np.ndarray,
    delta: float = DIAGONAL_LOADING,
) -> Tuple[List[int], List[np.ndarray]]:
    """
    Per source, the channel whose own masks give the highest posterior SNR

    Each channel's mask estimate drives an MVDR beamformer referenced to that
    channel over every channel's spectrum; the stream with the best posterior
    SNR wins.

    Args:
        spec: Mixture spectrogram (C x T x F)
        per_channel_masks: Aligned masks (C, S, T, F)
        delta: Diagonal loading

    Returns:
        Tuple of (chosen channel per source, posterior SNR per channel per source)
    """
    num_channels, num_sources = per_channel_masks.shape[:2]
    chosen, scores = [], []
    for k in range(num_sources):
        snrs = np.empty(num_channels)
        for c in range(num_channels):
            masks = per_channel_masks[c]
            cov = spatial_covariances(spec, masks[k], noise_mask(masks, k))
            snrs[c] = posterior_snr(mvdr_weights(cov, c, delta), cov, delta)
        chosen.append(int(np.argmax(snrs)))
        scores.append(snrs)
    return chosen, scores
