"""
Utterance-level enhancement: masking or MVDR, reference selection, VAD
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import DIAGONAL_LOADING
from src.dsp.stft import ComplexSpectrogram, istft_array
from src.model.network import MaskSet
from src.train.objectives import best_permutation
from src.utils.errors import ShapeError
from .alignment import align_streams
from .beamformer import beamform, mvdr_weights, posterior_snr, spatial_covariances
from .masking import noise_mask
from .reference import oracle_sdrs, select_reference, select_stream
from .vad import energy_vad, vad_gate

logger = logging.getLogger(__name__)


class EnhanceOptions(BaseModel):
    """Inference-time enhancement settings"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    mode: Literal['masking', 'mvdr'] = 'mvdr'
    ref_policy: Literal['max-snr', 'random', 'oracle'] = 'max-snr'
    vad: Literal['none', 'oracle', 'energy'] = 'none'
    seed: int = 0
    loading: float = Field(DIAGONAL_LOADING, ge=0)


@dataclass
class EnhancementResult:
    """Separated signals and the decisions that produced them"""
    waves: np.ndarray  # (S, L)
    references: List[int]  # channel used per source
    posterior_snrs: List[Optional[float]]
    masks: np.ndarray  # (S, T, F) masks driving each output
    options: EnhanceOptions
    extra: Dict[str, Any] = field(default_factory=dict)

    def sidecar(self) -> Dict[str, Any]:
        """JSON-ready summary of the choices"""
        return {
            'mode': self.options.mode,
            'ref_policy': self.options.ref_policy,
            'vad': self.options.vad,
            'references': self.references,
            'posterior_snrs': self.posterior_snrs,
            'mask_mean': [float(m.mean()) for m in self.masks],
            **self.extra,
        }


def _activity_for(
    options: EnhanceOptions,
    activity: Optional[np.ndarray],
    masked: np.ndarray,
    sample_rate: int,
) -> Optional[np.ndarray]:
    if options.vad == 'none':
        return None
    if options.vad == 'oracle':
        if activity is None:
            raise ValueError("oracle VAD needs per-sample source activity")
        return np.asarray(activity, dtype=bool)
    return np.stack([energy_vad(wave, sample_rate) for wave in masked])


def enhance_utterance(
    spec: ComplexSpectrogram,
    masks: Union[MaskSet, np.ndarray],
    options: EnhanceOptions = EnhanceOptions(),
    length: Optional[int] = None,
    references: Optional[np.ndarray] = None,
    activity: Optional[np.ndarray] = None,
) -> EnhancementResult:
    """
    Separate one utterance

    Args:
        spec: Mixture spectrogram (C x T x F)
        masks: A MaskSet (S x T x F) from a multi-channel model, or unaligned
            per-channel masks (C, S, T, F) from the single-channel model
        options: Mode, reference policy, VAD
        length: Output length in samples
        references: Clean sources (S, L) for the oracle policy
        activity: Per-source sample activity (S, L) for the oracle VAD

    Returns:
        EnhancementResult
    """
    cfg = spec.config
    num_channels = spec.num_channels
    rng = np.random.default_rng(options.seed)
    extra: Dict[str, Any] = {}

    if isinstance(masks, MaskSet) or np.ndim(masks) == 3:
        joint = masks.masks if isinstance(masks, MaskSet) else np.asarray(masks, dtype=np.float64)
        if joint.shape[1:] != spec.bins.shape[1:]:
            raise ShapeError(f"masks {joint.shape} vs spectrogram {spec.bins.shape}")
        stream_masks = np.broadcast_to(joint, (num_channels,) + joint.shape)
        if options.mode == 'masking':
            refs, snrs = [0] * joint.shape[0], [None] * joint.shape[0]
        else:
            refs, snrs = select_reference(spec, joint, options.ref_policy, references, rng, options.loading)
    else:
        per_channel = np.asarray(masks, dtype=np.float64)
        if per_channel.ndim != 4 or per_channel.shape[0] != num_channels:
            raise ShapeError(f"per-channel masks {per_channel.shape} vs spectrogram {spec.bins.shape}")
        stream_masks, perms = align_streams(per_channel, spec)
        extra['alignment'] = [list(p) for p in perms]
        num_sources = stream_masks.shape[1]
        if options.ref_policy == 'max-snr':
            refs, snrs = select_stream(spec, stream_masks, options.loading)
        elif options.ref_policy == 'random':
            refs, snrs = [int(rng.integers(num_channels)) for _ in range(num_sources)], [None] * num_sources
        else:
            if references is None:
                raise ValueError("oracle reference selection needs the clean references")
            refs = [int(np.argmax([oracle_sdrs(spec.select([c]), stream_masks[c][k], references[k])[0]
                                   for c in range(num_channels)]))
                    for k in range(num_sources)]
            snrs = [None] * num_sources

    num_sources = len(refs)
    used_masks = np.stack([stream_masks[refs[k]][k] for k in range(num_sources)])
    masked_waves = np.stack([
        istft_array(used_masks[k] * spec.bins[refs[k]], cfg, length) for k in range(num_sources)
    ])

    if options.mode == 'masking':
        waves = masked_waves
        posterior = [None if s is None else float(s[refs[k]]) for k, s in enumerate(snrs)]
    else:
        if num_channels == 1:
            logger.warning("MVDR with a single channel degenerates to a passthrough beamformer; "
                           "the output is the unprocessed channel")
        outputs, posterior = [], []
        for k in range(num_sources):
            source_masks = stream_masks[refs[k]]
            cov = spatial_covariances(spec, source_masks[k], noise_mask(source_masks, k))
            weights = mvdr_weights(cov, refs[k], options.loading)
            posterior.append(posterior_snr(weights, cov, options.loading))
            outputs.append(istft_array(beamform(spec, weights), cfg, length))
        waves = np.stack(outputs)

    if options.vad == 'oracle' and activity is not None and references is not None:
        # Output k follows the reference it matches best
        perm, _ = best_permutation(waves, references)
        activity = np.asarray(activity)[list(perm)]
        extra['vad_assignment'] = list(perm)
    flags = _activity_for(options, activity, masked_waves, cfg.sample_rate)
    if flags is not None:
        if flags.shape != waves.shape:
            raise ShapeError(f"VAD flags {flags.shape} vs outputs {waves.shape}")
        waves = np.stack([vad_gate(w, a, cfg.sample_rate) for w, a in zip(waves, flags)])

    return EnhancementResult(waves, [int(r) for r in refs], posterior, used_masks, options, extra)
