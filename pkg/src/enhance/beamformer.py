"""
Mask-based MVDR beamforming
"""
import logging
from dataclasses import dataclass

import numpy as np

from config.settings import DIAGONAL_LOADING, TRACE_FLOOR
from src.dsp.stft import ComplexSpectrogram
from src.utils.errors import ShapeError
from src.utils.validators import Validators

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
_MASK_FLOOR = 1e-12


@dataclass
class SpatialCovariances:
    """Per-frequency C x C speech and interference covariances of one target"""
    speech: np.ndarray  # (F, C, C)
    noise: np.ndarray  # (F, C, C)

    def __post_init__(self):
        if self.speech.shape != self.noise.shape or self.speech.ndim != 3 \
                or self.speech.shape[1] != self.speech.shape[2]:
            raise ShapeError(f"Covariances need matching (F, C, C) shapes, got "
                             f"{self.speech.shape} and {self.noise.shape}")
        for name, phi in (('speech', self.speech), ('noise', self.noise)):
            if np.max(np.abs(phi - _hermitian_transpose(phi)), initial=0.0) > HERMITIAN_TOL * max(
                    1.0, float(np.max(np.abs(phi), initial=0.0))):
                raise ValueError(f"{name} covariance is not Hermitian")

    @property
    def num_channels(self) -> int:
        return self.speech.shape[1]

    @property
    def num_bins(self) -> int:
        return self.speech.shape[0]

    def loaded_noise(self, delta: float = DIAGONAL_LOADING) -> np.ndarray:
        """Noise covariance plus delta * trace / C on the diagonal"""
        num = self.num_channels
        trace = np.real(np.trace(self.noise, axis1=1, axis2=2))
        load = delta * trace / num
        # Silent bins still get a positive load
        load = np.where(load > 0, load, delta)
        return self.noise + load[:, None, None] * np.eye(num)[None]


@dataclass
class BeamformerWeights:
    """F x C weights steering to a reference channel"""
    weights: np.ndarray
    ref: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("Beamformer weights are not finite")


def _hermitian_transpose(phi: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(phi, -1, -2))


def _weighted_covariance(bins: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """sum_t m(t,f) x x^H / sum_t m(t,f), unweighted where the mask vanishes"""
    weighted = np.einsum('tf,ctf,dtf->fcd', mask, bins, np.conj(bins))
    norm = mask.sum(axis=0)
    silent = norm <= _MASK_FLOOR
    phi = weighted / np.where(silent, 1.0, norm)[:, None, None]
    if np.any(silent):
        logger.debug("Mask vanishes at %d bins; using unweighted covariances there", int(silent.sum()))
        plain = np.einsum('ctf,dtf->fcd', bins[:, :, silent], np.conj(bins[:, :, silent])) / bins.shape[1]
        phi[silent] = plain
    return 0.5 * (phi + _hermitian_transpose(phi))


def spatial_covariances(
    spec: ComplexSpectrogram,
    speech_mask: np.ndarray,
    noise_mask: np.ndarray,
) -> SpatialCovariances:
    """
    Mask-weighted speech and interference covariances

    Args:
        spec: Mixture spectrogram (C x T x F)
        speech_mask: Target mask (T x F) in [0, 1]
        noise_mask: Interference mask (T x F) in [0, 1]

    Returns:
        SpatialCovariances with Hermitian-symmetrized matrices
    """
    for name, mask in (('speech', speech_mask), ('noise', noise_mask)):
        Validators.require_shape(mask, spec.bins.shape[1:], f"{name} mask")
        if np.any(mask < 0) or np.any(mask > 1):
            raise ValueError(f"{name} mask values must lie in [0, 1]")
    return SpatialCovariances(
        _weighted_covariance(spec.bins, speech_mask),
        _weighted_covariance(spec.bins, noise_mask),
    )


def mvdr_weights(cov: SpatialCovariances, ref: int, delta: float = DIAGONAL_LOADING) -> BeamformerWeights:
    """
    Trace-normalized MVDR weights

    w(f) = (Phi_n^-1 Phi_s / trace(Phi_n^-1 Phi_s)) e_ref with the loaded noise
    covariance; bins whose trace is below the floor pass the reference channel
    through unchanged.

    Args:
        cov: Covariances of one target
        ref: Reference channel
        delta: Diagonal loading relative to trace / C

    Returns:
        BeamformerWeights (F x C)
    """
    Validators.require_channel(ref, cov.num_channels)
    product = np.linalg.solve(cov.loaded_noise(delta), cov.speech)
    trace = np.trace(product, axis1=1, axis2=2)

    weights = np.zeros((cov.num_bins, cov.num_channels), dtype=np.complex128)
    weights[:, ref] = 1.0
    active = np.abs(trace) >= TRACE_FLOOR
    weights[active] = product[active, :, ref] / trace[active, None]
    if not np.all(active):
        logger.debug("Passthrough weights at %d silent bins", int((~active).sum()))
    return BeamformerWeights(weights, ref)


def beamform(spec: ComplexSpectrogram, weights: BeamformerWeights) -> np.ndarray:
    """y(t, f) = w(f)^H x(t, f); returns (T, F)"""
    if weights.weights.shape != (spec.num_bins, spec.num_channels):
        raise ShapeError(f"beamform: weights {weights.weights.shape} vs spectrogram {spec.bins.shape}")
    return np.einsum('fc,ctf->tf', np.conj(weights.weights), spec.bins)


def posterior_snr(weights: BeamformerWeights, cov: SpatialCovariances, delta: float = DIAGONAL_LOADING) -> float:
    """
    Beamformed speech power over beamformed (loaded) noise power, summed over frequency
    """
    w = weights.weights
    speech = np.real(np.einsum('fc,fcd,fd->f', np.conj(w), cov.speech, w)).sum()
    noise = np.real(np.einsum('fc,fcd,fd->f', np.conj(w), cov.loaded_noise(delta), w)).sum()
    if noise <= 0:
        return 0.0
    return max(float(speech / noise), 0.0)
