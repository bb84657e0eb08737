from .masking import apply_masks, noise_mask, ideal_ratio_masks
from .beamformer import (
    SpatialCovariances,
    BeamformerWeights,
    spatial_covariances,
    mvdr_weights,
    beamform,
    posterior_snr,
)
from .reference import select_reference, select_stream, candidate_snrs, oracle_sdrs
from .vad import vad_gate, energy_vad, ramp_gain
from .alignment import align_streams
from .pipeline import EnhanceOptions, EnhancementResult, enhance_utterance

__all__ = [
    'apply_masks', 'noise_mask', 'ideal_ratio_masks',
    'SpatialCovariances', 'BeamformerWeights', 'spatial_covariances', 'mvdr_weights', 'beamform',
    'posterior_snr', 'select_reference', 'select_stream', 'candidate_snrs', 'oracle_sdrs',
    'vad_gate', 'energy_vad', 'ramp_gain', 'align_streams',
    'EnhanceOptions', 'EnhancementResult', 'enhance_utterance',
]
