"""
WAV reading and writing
"""
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import soundfile as sf

from config.settings import SAMPLE_RATE
from src.utils.errors import DataError
from .stft import MultiChannelWave

PathLike = Union[str, Path]

# PCM-16 for 16-bit integer files, FLOAT for 32-bit IEEE files
SUBTYPES = {'pcm16': 'PCM_16', 'float32': 'FLOAT'}


def read_wav(path: PathLike, expected_rate: int = SAMPLE_RATE) -> Tuple[np.ndarray, int]:
    """
    Read a mono WAV file as float64 samples

    Args:
        path: WAV path
        expected_rate: Required sample rate (no resampling is done)

    Returns:
        Tuple of (samples, sample_rate)
    """
    try:
        samples, rate = sf.read(str(path), dtype='float64', always_2d=True)
    except (RuntimeError, OSError) as e:
        raise DataError(f"Cannot read WAV {path}: {e}") from e

    if rate != expected_rate:
        raise DataError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if samples.shape[1] != 1:
        raise DataError(f"{path}: expected a mono file, got {samples.shape[1]} channels")
    return samples[:, 0], rate


def write_wav(
    path: PathLike,
    samples: np.ndarray,
    sample_rate: int = SAMPLE_RATE,
    encoding: str = 'float32',
) -> Path:
    """
    Write mono samples to a WAV file

    Args:
        path: Output path (parent directories are created)
        samples: 1-D samples
        sample_rate: Sample rate in Hz
        encoding: 'float32' (IEEE float) or 'pcm16'

    Returns:
        The written path
    """
    path = Path(path)
    if encoding not in SUBTYPES:
        raise ValueError(f"Unknown WAV encoding: {encoding}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), np.asarray(samples, dtype=np.float64), sample_rate,
                 subtype=SUBTYPES[encoding])
    except (RuntimeError, OSError) as e:
        raise DataError(f"Cannot write WAV {path}: {e}") from e
    return path


def read_multichannel(paths: Sequence[PathLike], expected_rate: int = SAMPLE_RATE) -> MultiChannelWave:
    """
    Read one mono WAV per channel into a multi-channel wave

    Args:
        paths: Ordered channel paths
        expected_rate: Required sample rate

    Returns:
        MultiChannelWave with len(paths) channels
    """
    if not paths:
        raise DataError("No channel WAV paths given")
    channels = [read_wav(p, expected_rate)[0] for p in paths]
    lengths = {len(c) for c in channels}
    if len(lengths) != 1:
        raise DataError(f"Channel WAVs differ in length: {sorted(lengths)}")
    return MultiChannelWave(np.stack(channels), expected_rate)


def write_multichannel(
    wave: MultiChannelWave,
    paths: Sequence[PathLike],
    encoding: str = 'float32',
) -> List[Path]:
    """
    Write each channel of a wave to its own mono WAV

    Args:
        wave: Multi-channel wave
        paths: One output path per channel
        encoding: WAV sample encoding

    Returns:
        Written paths
    """
    if len(paths) != wave.num_channels:
        raise ValueError(f"{len(paths)} paths for {wave.num_channels} channels")
    return [write_wav(p, ch, wave.sample_rate, encoding) for p, ch in zip(paths, wave.samples)]
