"""
Short-time Fourier analysis and overlap-add synthesis
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from config.settings import FFT_SIZE, HOP_SIZE, WINDOW, SAMPLE_RATE
from src.utils.errors import ShapeError
from src.utils.validators import Validators

# analysis window name -> scipy window used before the square root
_WINDOW_BASES = {
    'sqrt_hann': 'hann',
    'sqrt_hamming': 'hamming',
}
_NORM_FLOOR = 1e-10


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters shared by analysis and synthesis"""
    fft_size: int = FFT_SIZE
    hop: int = HOP_SIZE
    window: str = WINDOW
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.window not in _WINDOW_BASES:
            raise ValueError(f"Unknown window: {self.window}")
        if self.fft_size < 2 or self.fft_size % 2:
            raise ValueError(f"fft_size must be even and >= 2, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")
        product = self.analysis_window() * self.synthesis_window()
        if not signal.check_COLA(product, self.fft_size, self.fft_size - self.hop):
            raise ValueError(
                f"Window {self.window} does not satisfy COLA at hop {self.hop}"
            )

    @property
    def num_bins(self) -> int:
        """Onesided bin count F"""
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        """Reflective center padding on each side"""
        return self.fft_size // 2

    def analysis_window(self) -> np.ndarray:
        base = signal.get_window(_WINDOW_BASES[self.window], self.fft_size, fftbins=True)
        return np.sqrt(base)

    def synthesis_window(self) -> np.ndarray:
        return self.analysis_window()

    def num_frames(self, length: int) -> int:
        """Frame count T for a signal of the given length"""
        return 1 + (length + 2 * self.pad - self.fft_size) // self.hop

    def frame_seconds(self) -> float:
        return self.hop / self.sample_rate


@dataclass
class MultiChannelWave:
    """C x L real samples at a fixed rate"""
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ShapeError(f"Wave must be C x L, got shape {samples.shape}")
        Validators.require_finite(samples, "Wave")
        self.samples = samples

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    def select(self, channels: Sequence[int]) -> 'MultiChannelWave':
        """Wave restricted to the given channels, in the given order"""
        return MultiChannelWave(self.samples[list(channels)], self.sample_rate)


@dataclass
class ComplexSpectrogram:
    """C x T x F complex spectra with the config that produced them"""
    bins: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.bins.ndim != 3:
            raise ShapeError(f"Spectrogram must be C x T x F, got shape {self.bins.shape}")
        if self.bins.shape[2] != self.config.num_bins:
            raise ShapeError(
                f"Spectrogram has {self.bins.shape[2]} bins, config expects {self.config.num_bins}"
            )

    @property
    def num_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def num_bins(self) -> int:
        return self.bins.shape[2]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.bins)

    def select(self, channels: Sequence[int]) -> 'ComplexSpectrogram':
        """Spectrogram restricted to the given channels, in the given order"""
        return ComplexSpectrogram(self.bins[list(channels)], self.config)


def stft(wave: MultiChannelWave, cfg: StftConfig) -> ComplexSpectrogram:
    """
    Per-channel STFT with reflective center padding

    Frame t is centered at sample t * hop, so T = 1 + floor(L / hop).

    Args:
        wave: Multi-channel time signal
        cfg: Framing parameters

    Returns:
        Onesided complex spectrogram (C x T x F)
    """
    if wave.sample_rate != cfg.sample_rate:
        raise ValueError(f"Sample rate {wave.sample_rate} does not match config {cfg.sample_rate}")
    if wave.length < cfg.fft_size:
        raise ValueError(f"input too short: {wave.length} samples < fft_size {cfg.fft_size}")
    Validators.require_finite(wave.samples, "Wave")

    padded = np.pad(wave.samples, ((0, 0), (cfg.pad, cfg.pad)), mode='reflect')
    frames = sliding_window_view(padded, cfg.fft_size, axis=-1)[:, ::cfg.hop, :]
    bins = np.fft.rfft(frames * cfg.analysis_window(), axis=-1)
    return ComplexSpectrogram(bins, cfg)


def _synthesis_norm(cfg: StftConfig, num_frames: int) -> np.ndarray:
    """Reciprocal of the summed window product, zero where the sum vanishes"""
    product = cfg.analysis_window() * cfg.synthesis_window()
    total = cfg.fft_size + (num_frames - 1) * cfg.hop
    norm = np.zeros(total)
    for t in range(num_frames):
        norm[t * cfg.hop:t * cfg.hop + cfg.fft_size] += product
    inverse = np.zeros(total)
    nonzero = norm > _NORM_FLOOR
    inverse[nonzero] = 1.0 / norm[nonzero]
    return inverse


def _default_length(cfg: StftConfig, num_frames: int) -> int:
    return (num_frames - 1) * cfg.hop


def istft_array(bins: np.ndarray, cfg: StftConfig, length: Optional[int] = None) -> np.ndarray:
    """
    Overlap-add synthesis on a raw (..., T, F) complex array

    Args:
        bins: Complex spectra, leading axes are kept
        cfg: Framing parameters
        length: Output length (defaults to (T - 1) * hop); shorter outputs are
            truncated, longer ones zero-padded

    Returns:
        Real signal (..., length)
    """
    num_frames = bins.shape[-2]
    length = _default_length(cfg, num_frames) if length is None else length
    frames = np.fft.irfft(bins, n=cfg.fft_size, axis=-1) * cfg.synthesis_window()

    total = cfg.fft_size + (num_frames - 1) * cfg.hop
    out = np.zeros(bins.shape[:-2] + (total,))
    for t in range(num_frames):
        out[..., t * cfg.hop:t * cfg.hop + cfg.fft_size] += frames[..., t, :]
    out *= _synthesis_norm(cfg, num_frames)

    result = np.zeros(bins.shape[:-2] + (length,))
    available = min(length, total - cfg.pad)
    result[..., :available] = out[..., cfg.pad:cfg.pad + available]
    return result


def istft_adjoint_array(
    wave: np.ndarray,
    cfg: StftConfig,
    num_frames: int,
) -> np.ndarray:
    """
    Adjoint of istft_array as a real-linear map of the complex spectrogram

    For any Z and g: sum(istft_array(Z) * g) == Re(sum(conj(Z) * istft_adjoint_array(g))).

    Args:
        wave: Real signal (..., L) living in the output space of istft_array
        cfg: Framing parameters
        num_frames: Frame count T of the spectrogram space

    Returns:
        Complex array (..., T, F)
    """
    length = wave.shape[-1]
    total = cfg.fft_size + (num_frames - 1) * cfg.hop
    available = min(length, total - cfg.pad)

    padded = np.zeros(wave.shape[:-1] + (total,))
    padded[..., cfg.pad:cfg.pad + available] = wave[..., :available]
    padded *= _synthesis_norm(cfg, num_frames)

    frames = sliding_window_view(padded, cfg.fft_size, axis=-1)[..., ::cfg.hop, :]
    frames = frames * cfg.synthesis_window()

    # irfft counts interior bins twice
    weights = np.full(cfg.num_bins, 2.0 / cfg.fft_size)
    weights[0] = weights[-1] = 1.0 / cfg.fft_size
    return np.fft.rfft(frames, axis=-1) * weights


def istft(spec: ComplexSpectrogram, cfg: StftConfig, length: Optional[int] = None) -> MultiChannelWave:
    """
    Overlap-add inverse of stft

    Args:
        spec: Spectrogram produced with cfg
        cfg: Framing parameters (must equal spec.config)
        length: Output length in samples (defaults to (T - 1) * hop)

    Returns:
        Reconstructed multi-channel wave
    """
    if spec.config != cfg:
        raise ValueError(f"Spectrogram config {spec.config} does not match {cfg}")
    samples = istft_array(spec.bins, cfg, length)
    return MultiChannelWave(samples, cfg.sample_rate)
