"""
Time-frequency masking
"""
from typing import Union

import numpy as np

from src.dsp.stft import ComplexSpectrogram
from src.model.network import MaskSet
from src.utils.errors import ShapeError
from src.utils.validators import Validators

_POWER_FLOOR = 1e-20


def _mask_array(masks: Union[MaskSet, np.ndarray]) -> np.ndarray:
    return masks.masks if isinstance(masks, MaskSet) else np.asarray(masks, dtype=np.float64)


def apply_masks(spec: ComplexSpectrogram, masks: Union[MaskSet, np.ndarray], channel: int = 0) -> np.ndarray:
    """
    Mask one channel's complex spectrum once per source

    Args:
        spec: Mixture spectrogram (C x T x F)
        masks: S x T x F masks
        channel: Channel to mask

    Returns:
        Complex spectra (S, T, F)
    """
    Validators.require_channel(channel, spec.num_channels)
    values = _mask_array(masks)
    if values.shape[1:] != spec.bins.shape[1:]:
        raise ShapeError(f"apply_masks: masks {values.shape} vs spectrogram {spec.bins.shape}")
    return values * spec.bins[channel][None]


def noise_mask(masks: Union[MaskSet, np.ndarray], source: int) -> np.ndarray:
    """
    Interference mask of one source: the other source's mask plus the
    unexplained remainder, clamped to [0, 1]
    """
    values = _mask_array(masks)
    if values.shape[0] != 2:
        raise ShapeError(f"noise_mask expects 2 sources, got {values.shape[0]}")
    residual = np.maximum(0.0, 1.0 - values[0] - values[1])
    return np.clip(values[1 - source] + residual, 0.0, 1.0)


def ideal_ratio_masks(sources: np.ndarray, noise: np.ndarray) -> MaskSet:
    """
    |S_k|^2 / (sum_j |S_j|^2 + |N|^2) from known components

    Args:
        sources: Complex source spectra at one channel (S, T, F)
        noise: Complex residual spectrum at that channel (T, F)

    Returns:
        MaskSet of ideal ratio masks; silent bins get zero masks
    """
    source_power = np.abs(sources) ** 2
    total = source_power.sum(axis=0) + np.abs(noise) ** 2
    masks = np.where(total > _POWER_FLOOR, source_power / np.maximum(total, _POWER_FLOOR), 0.0)
    return MaskSet(np.clip(masks, 0.0, 1.0))
