"""
Image-method room impulse responses with fractional-delay rendering
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from config.settings import FRACTIONAL_DELAY_TAPS, RIR_SECONDS, SAMPLE_RATE, SPEED_OF_SOUND
from .scenario import RoomScenario

logger = logging.getLogger(__name__)

_MIN_DISTANCE = 1e-9


@dataclass
class RirSet:
    """Impulse responses, mics x sources x samples"""
    responses: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.responses.ndim != 3:
            raise ValueError(f"RirSet needs a mics x sources x samples array, got {self.responses.shape}")
        if not np.all(np.isfinite(self.responses)):
            raise ValueError("RirSet contains non-finite taps")

    @property
    def num_mics(self) -> int:
        return self.responses.shape[0]

    @property
    def num_sources(self) -> int:
        return self.responses.shape[1]

    @property
    def length(self) -> int:
        return self.responses.shape[2]

    def source(self, k: int) -> np.ndarray:
        """Responses of source k at every mic (mics x samples)"""
        return self.responses[:, k]


def fractional_delay_kernel(delay, taps: int = FRACTIONAL_DELAY_TAPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hann-windowed sinc centered at fractional delays

    Args:
        delay: Delay in samples, scalar or array (K,)
        taps: Kernel support; taps whose offset from delay reaches taps/2 are zero

    Returns:
        Tuple of (sample indices, tap values), each (..., taps)
    """
    delay = np.asarray(delay, dtype=np.float64)[..., None]
    half = taps / 2
    start = np.floor(delay - half).astype(np.int64) + 1
    n = start + np.arange(taps)
    offset = n - delay
    window = np.where(np.abs(offset) < half, 0.5 * (1.0 + np.cos(np.pi * offset / half)), 0.0)
    return n, window * np.sinc(offset)


def image_sources(
    room: np.ndarray,
    source: np.ndarray,
    beta: float,
    max_order: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Image positions and reflection gains up to max_order reflections

    Image (n, q) sits at (1 - 2q) * source + 2 n * room and reaches the
    microphone after sum(|n - q| + |n|) wall reflections.

    Returns:
        Tuple of (positions (K, 3), gains (K,))
    """
    reach = np.arange(-max_order, max_order + 1)
    n = np.array(list(itertools.product(reach, reach, reach)))  # (M, 3)
    q = np.array(list(itertools.product((0, 1), repeat=3)))  # (8, 3)
    n_all = np.repeat(n, len(q), axis=0)
    q_all = np.tile(q, (len(n), 1))

    order = np.sum(np.abs(n_all - q_all) + np.abs(n_all), axis=1)
    keep = order <= max_order
    n_all, q_all, order = n_all[keep], q_all[keep], order[keep]

    positions = (1 - 2 * q_all) * source + 2 * n_all * room
    return positions, np.power(float(beta), order)


def image_method_rir(
    scenario: RoomScenario,
    mic: np.ndarray,
    source: np.ndarray,
    max_order: int,
    length: int = int(RIR_SECONDS * SAMPLE_RATE),
    sample_rate: int = SAMPLE_RATE,
    c: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """
    Impulse response between one source and one microphone

    Every image contributes beta^reflections / (4 pi d) at delay d / c,
    rendered with an 8-tap Hann-windowed sinc; taps beyond `length` are
    dropped.

    Args:
        scenario: Room geometry and reflection coefficient
        mic: Microphone position (3,)
        source: Source position (3,)
        max_order: Maximum total reflection count
        length: Response length in samples
        sample_rate: Hz
        c: Speed of sound (m/s)

    Returns:
        Impulse response (length,)
    """
    mic = np.asarray(mic, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    if not (scenario.contains(mic) and scenario.contains(source)):
        raise ValueError(f"Positions {mic.tolist()} / {source.tolist()} must lie inside the room")
    if np.linalg.norm(mic - source) < _MIN_DISTANCE:
        raise ValueError("zero distance between microphone and source")

    positions, gains = image_sources(scenario.room, source, scenario.beta, max_order)
    distances = np.linalg.norm(positions - mic, axis=1)
    delays = distances / c * sample_rate
    amplitudes = gains / (4 * np.pi * distances)

    reachable = (delays < length + FRACTIONAL_DELAY_TAPS) & (amplitudes != 0.0)
    idx, taps = fractional_delay_kernel(delays[reachable])
    values = amplitudes[reachable, None] * taps
    valid = (idx >= 0) & (idx < length)

    response = np.zeros(length)
    np.add.at(response, idx[valid], values[valid])
    return response


def compute_rirs(
    scenario: RoomScenario,
    mics: Sequence[np.ndarray],
    sources: Sequence[np.ndarray],
    max_order: int,
    length: int = int(RIR_SECONDS * SAMPLE_RATE),
    sample_rate: int = SAMPLE_RATE,
) -> RirSet:
    """Impulse responses for every (mic, source) pair"""
    responses = np.stack([
        np.stack([image_method_rir(scenario, m, s, max_order, length, sample_rate) for s in sources])
        for m in mics
    ])
    logger.debug("Computed %d x %d RIRs (order %d, %d taps)", len(mics), len(sources), max_order, length)
    return RirSet(responses, sample_rate)


def direct_path_delay(mic: np.ndarray, source: np.ndarray, sample_rate: int = SAMPLE_RATE,
                      c: float = SPEED_OF_SOUND) -> float:
    """Propagation delay of the direct path in samples"""
    return float(np.linalg.norm(np.asarray(mic) - np.asarray(source)) / c * sample_rate)
