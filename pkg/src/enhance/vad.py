"""
Voice-activity gating
"""
import numpy as np
from scipy import ndimage

from config.settings import (
    ENERGY_VAD_FRAME_SECONDS,
    ENERGY_VAD_HANGOVER_SECONDS,
    ENERGY_VAD_THRESHOLD_DBFS,
    SAMPLE_RATE,
    VAD_RAMP_SECONDS,
)
from src.utils.validators import Validators


def ramp_gain(activity: np.ndarray, ramp: int) -> np.ndarray:
    """
    Per-sample gain: 1 on active samples, a raised-cosine fade over `ramp`
    samples into each inactive region, 0 beyond
    """
    activity = np.asarray(activity, dtype=bool)
    if activity.all():
        return np.ones(activity.shape)
    if not activity.any():
        return np.zeros(activity.shape)
    distance = ndimage.distance_transform_edt(~activity)
    if ramp <= 0:
        return activity.astype(np.float64)
    return np.where(distance < ramp, 0.5 * (1.0 + np.cos(np.pi * distance / ramp)), 0.0)


def vad_gate(
    wave: np.ndarray,
    activity: np.ndarray,
    sample_rate: int = SAMPLE_RATE,
    ramp_seconds: float = VAD_RAMP_SECONDS,
) -> np.ndarray:
    """
    Zero a signal where its source is inactive

    Active samples keep unit gain. Each raised-cosine ramp lies on the
    inactive side of its boundary, so inactive samples are exactly zero only
    from ramp_seconds past the boundary on.

    Args:
        wave: Signal (L,)
        activity: Per-sample activity flags (L,)
        sample_rate: Hz
        ramp_seconds: Raised-cosine ramp length at each boundary

    Returns:
        Gated signal (L,)
    """
    Validators.require_same_length(np.asarray(wave), np.asarray(activity), "VAD flags")
    return np.asarray(wave, dtype=np.float64) * ramp_gain(activity, int(round(ramp_seconds * sample_rate)))


def energy_vad(
    wave: np.ndarray,
    sample_rate: int = SAMPLE_RATE,
    threshold_dbfs: float = ENERGY_VAD_THRESHOLD_DBFS,
    hangover_seconds: float = ENERGY_VAD_HANGOVER_SECONDS,
    frame_seconds: float = ENERGY_VAD_FRAME_SECONDS,
) -> np.ndarray:
    """
    Frame-energy activity detector

    A frame is active when its RMS level exceeds threshold_dbfs; activity is
    held for hangover_seconds after each active frame.

    Returns:
        Per-sample flags (L,)
    """
    wave = np.asarray(wave, dtype=np.float64)
    frame = max(1, int(round(frame_seconds * sample_rate)))
    num_frames = int(np.ceil(len(wave) / frame))
    padded = np.zeros(num_frames * frame)
    padded[:len(wave)] = wave
    rms = np.sqrt(np.mean(padded.reshape(num_frames, frame) ** 2, axis=1))
    level = 20.0 * np.log10(np.maximum(rms, 1e-12))
    active = level > threshold_dbfs

    hold = int(round(hangover_seconds / frame_seconds))
    if hold > 0:
        active = np.convolve(active.astype(np.int64), np.ones(hold + 1, dtype=np.int64))[:num_frames] > 0
    return np.repeat(active, frame)[:len(wave)]
