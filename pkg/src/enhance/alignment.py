"""
Cross-channel output alignment for the multi-stream baseline
"""
import itertools
from typing import List, Tuple

import numpy as np

from src.dsp.stft import ComplexSpectrogram
from src.utils.errors import ShapeError

_NORM_FLOOR = 1e-12


def _normalized_outputs(masks: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """|m_k * X| scaled to unit Frobenius norm, per source (S, T, F)"""
    magnitude = masks * np.abs(bins)[None]
    norms = np.sqrt(np.sum(magnitude ** 2, axis=(1, 2)))
    return magnitude / np.maximum(norms, _NORM_FLOOR)[:, None, None]


def assignment_errors(
    candidate: np.ndarray,
    anchor: np.ndarray,
) -> List[Tuple[Tuple[int, ...], float]]:
    """MSE against the anchor for every ordering of the candidate's sources"""
    num = candidate.shape[0]
    return [
        (perm, float(np.mean((candidate[list(perm)] - anchor) ** 2)))
        for perm in itertools.permutations(range(num))
    ]


def align_streams(
    per_channel_masks: np.ndarray,
    spec: ComplexSpectrogram,
) -> Tuple[np.ndarray, List[Tuple[int, ...]]]:
    """
    Reorder each channel's sources to match channel 0

    Args:
        per_channel_masks: Unaligned masks (C, S, T, F)
        spec: Mixture spectrogram (C x T x F)

    Returns:
        Tuple of (aligned masks, permutation applied per channel); ties keep
        the identity
    """
    if per_channel_masks.ndim != 4 or per_channel_masks.shape[0] != spec.num_channels:
        raise ShapeError(f"align_streams: masks {per_channel_masks.shape} vs spectrogram {spec.bins.shape}")

    anchor = _normalized_outputs(per_channel_masks[0], spec.bins[0])
    aligned = [per_channel_masks[0]]
    perms: List[Tuple[int, ...]] = [tuple(range(per_channel_masks.shape[1]))]
    for c in range(1, spec.num_channels):
        candidate = _normalized_outputs(per_channel_masks[c], spec.bins[c])
        perm, _ = min(assignment_errors(candidate, anchor), key=lambda item: item[1])
        aligned.append(per_channel_masks[c][list(perm)])
        perms.append(perm)
    return np.stack(aligned), perms
