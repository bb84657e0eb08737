"""
Separation networks: the spatio-temporal model and the single-channel baseline
"""
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from src.dsp.stft import ComplexSpectrogram, StftConfig
from src.graph.tensor import OpGraph, Tensor
from src.utils.errors import DataError, ShapeError
from .checkpoint import load_checkpoint
from .config import ModelConfig
from .layers import (
    channel_attention,
    input_features,
    mask_heads,
    normalize_spectra,
    relational_features,
    temporal_layer,
)
from .params import params_from_arrays, validate_params


@dataclass
class MaskSet:
    """S x T x F masks in [0, 1], one slab per source"""
    masks: np.ndarray

    def __post_init__(self):
        if self.masks.ndim != 3 or self.masks.shape[0] != 2:
            raise ShapeError(f"MaskSet must be 2 x T x F, got shape {self.masks.shape}")
        if np.any(self.masks < 0) or np.any(self.masks > 1):
            raise ValueError("Mask values must lie in [0, 1]")

    @property
    def num_sources(self) -> int:
        return self.masks.shape[0]

    def swapped(self) -> 'MaskSet':
        return MaskSet(self.masks[::-1].copy())


class SpatioTemporalNet:
    """
    Channel-count and channel-order invariant mask estimator

    Interleaved topology: num_blocks x (channel attention -> temporal layer),
    a global fusion attention layer, mean pooling over channels and two mask
    heads. Stacked topology: every attention layer first, then every temporal
    layer, then mean pooling.
    """

    def __init__(self, cfg: ModelConfig, params: Mapping[str, Tensor]):
        if cfg.architecture != 'spatiotemporal':
            raise ValueError(f"SpatioTemporalNet needs architecture 'spatiotemporal', got {cfg.architecture}")
        validate_params(params, cfg)
        self.cfg = cfg
        self.params = params

    def build(self, g: OpGraph, spec: ComplexSpectrogram) -> Tensor:
        """
        Record the forward pass

        Args:
            g: Graph to record into
            spec: Mixture spectrogram (C x T x F), any C >= 1

        Returns:
            Mask tensor (S, T, F)
        """
        cfg, params = self.cfg, self.params
        x = input_features(g, spec.magnitude(), params, cfg)

        if cfg.topology == 'interleaved':
            for b in range(cfg.num_blocks):
                x = channel_attention(g, x, params, f"block{b}.attn", cfg)
                x = temporal_layer(g, x, params, f"block{b}.rnn", cfg)
            x = channel_attention(g, x, params, "fusion.attn", cfg)
        else:
            for b in range(cfg.num_blocks):
                x = channel_attention(g, x, params, f"block{b}.attn", cfg)
            for b in range(cfg.num_blocks):
                x = temporal_layer(g, x, params, f"block{b}.rnn", cfg)

        pooled = g.mean(x, axis=0)  # (T, N)
        return mask_heads(g, pooled, params, cfg)

    def masks(self, spec: ComplexSpectrogram) -> MaskSet:
        return MaskSet(self.build(OpGraph(), spec).data.astype(np.float64))


class SingleChannelNet:
    """
    Monaural mask estimator used per channel by the multi-stream baselines

    Normalized power spectrum (optionally with the channel's relational
    feature), stacked temporal layers and two mask heads.
    """

    def __init__(self, cfg: ModelConfig, params: Mapping[str, Tensor]):
        if cfg.architecture != 'single_channel':
            raise ValueError(f"SingleChannelNet needs architecture 'single_channel', got {cfg.architecture}")
        validate_params(params, cfg)
        self.cfg = cfg
        self.params = params

    def build(
        self,
        g: OpGraph,
        spec: ComplexSpectrogram,
        relational: Optional[np.ndarray] = None,
    ) -> Tensor:
        """
        Record the forward pass for one channel

        Args:
            g: Graph to record into
            spec: Single-channel spectrogram (1 x T x F)
            relational: The channel's relational feature (1 x T x F), required
                when the config uses relational input

        Returns:
            Mask tensor (S, T, F)
        """
        if spec.num_channels != 1:
            raise ShapeError(f"Single-channel model got {spec.num_channels} channels")
        if self.cfg.relational and relational is None:
            raise ValueError("This model needs the channel's relational feature")

        power = spec.magnitude() ** 2
        x = input_features(g, power, self.params, self.cfg, relational)
        for layer in range(self.cfg.single_channel_layers):
            x = temporal_layer(g, x, self.params, f"rnn{layer}", self.cfg)
        pooled = g.reshape(x, x.shape[1:])
        return mask_heads(g, pooled, self.params, self.cfg)

    def masks(self, spec: ComplexSpectrogram, relational: Optional[np.ndarray] = None) -> MaskSet:
        return MaskSet(self.build(OpGraph(), spec, relational).data.astype(np.float64))

    def per_channel_masks(self, spec: ComplexSpectrogram) -> np.ndarray:
        """
        Run the model on every channel independently

        Args:
            spec: Multi-channel spectrogram (C x T x F)

        Returns:
            Masks (C, S, T, F), unaligned
        """
        relational = None
        if self.cfg.relational:
            relational = relational_features(normalize_spectra(spec.magnitude() ** 2))
        results = []
        for c in range(spec.num_channels):
            rel_c = None if relational is None else relational[c:c + 1]
            results.append(self.masks(spec.select([c]), rel_c).masks)
        return np.stack(results)


SeparationNet = Union[SpatioTemporalNet, SingleChannelNet]


def build_network(cfg: ModelConfig, params: Mapping[str, Tensor]) -> SeparationNet:
    """Network class matching the configured architecture"""
    if cfg.architecture == 'single_channel':
        return SingleChannelNet(cfg, params)
    return SpatioTemporalNet(cfg, params)


def forward(spec: ComplexSpectrogram, cfg: ModelConfig, params: Mapping[str, Tensor]) -> MaskSet:
    """Masks of the spatio-temporal model for one utterance"""
    return SpatioTemporalNet(cfg, params).masks(spec)


def single_channel_forward(
    spec: ComplexSpectrogram,
    cfg: ModelConfig,
    params: Mapping[str, Tensor],
    relational: Optional[np.ndarray] = None,
) -> MaskSet:
    """Masks of the single-channel model for a one-channel spectrogram"""
    return SingleChannelNet(cfg, params).masks(spec, relational)


def network_metadata(cfg: ModelConfig, stft_cfg: StftConfig) -> Dict[str, Any]:
    """Checkpoint metadata needed to rebuild a network"""
    return {'model': cfg.model_dump(), 'stft': asdict(stft_cfg)}


def load_network(path: Union[str, Path]) -> Tuple[SeparationNet, StftConfig, Dict[str, Any]]:
    """
    Rebuild a network from a checkpoint

    Args:
        path: Checkpoint written by the trainer

    Returns:
        Tuple of (network, STFT config it was trained with, full metadata)
    """
    arrays, metadata = load_checkpoint(path)
    if 'model' not in metadata or 'stft' not in metadata:
        raise DataError(f"{path}: checkpoint carries no model/stft metadata")
    cfg = ModelConfig(**metadata['model'])
    stft_cfg = StftConfig(**metadata['stft'])
    return build_network(cfg, params_from_arrays(arrays, cfg)), stft_cfg, metadata
