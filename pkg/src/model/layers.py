"""
Building blocks of the separation networks

Feature tensors are laid out channels-first as (C, T, N). Attention regroups
them per frame as (T, C, N) so that each frame's channels attend to each other.
"""
import math
from typing import List, Mapping, Optional

import numpy as np

from config.settings import LAYER_NORM_EPS, RELATIONAL_EPS
from src.graph.tensor import OpGraph, Tensor, constant
from src.utils.errors import ShapeError
from .config import ModelConfig

_ALL = slice(None)


def normalize_spectra(features: np.ndarray, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Per-(channel, frame) mean and variance normalization over the last axis"""
    mu = features.mean(axis=-1, keepdims=True)
    var = features.var(axis=-1, keepdims=True)
    return (features - mu) / np.sqrt(var + eps)


def relational_features(features: np.ndarray, eps_d: float = RELATIONAL_EPS) -> np.ndarray:
    """
    Similarity-weighted combination of the other channels' spectra

    For frame t and channel i the weights over j != i are the softmax of
    1 / (||X_i(t) - X_j(t)|| + eps_d), so nearer spectra weigh more.

    Args:
        features: Normalized spectra (C, T, N)
        eps_d: Guard added to the distance

    Returns:
        Relational features (C, T, N)
    """
    num_channels = features.shape[0]
    if num_channels < 2:
        raise ValueError("relational features require >= 2 channels")

    frames = np.transpose(features, (1, 0, 2))  # (T, C, N)
    diff = frames[:, :, np.newaxis, :] - frames[:, np.newaxis, :, :]
    distances = np.sqrt((diff ** 2).sum(axis=-1))  # (T, C, C)

    logits = 1.0 / (distances + eps_d)
    logits[:, np.arange(num_channels), np.arange(num_channels)] = -np.inf
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=-1, keepdims=True)

    combined = weights @ frames  # (T, C, N)
    return np.transpose(combined, (1, 0, 2))


def input_features(
    g: OpGraph,
    spectra: np.ndarray,
    params: Mapping[str, Tensor],
    cfg: ModelConfig,
    relational: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Layer-normalized spectral features, optionally extended with relational features

    Args:
        g: Graph to record into
        spectra: Real spectra (C, T, F): magnitudes or power
        params: Holds input_norm.gain / input_norm.bias
        cfg: Model configuration
        relational: Precomputed relational features (C, T, F); computed from
            spectra when the config asks for them and none are given

    Returns:
        Feature tensor (C, T, N) or (C, T, 2N)
    """
    if spectra.shape[-1] != cfg.feature_dim:
        raise ShapeError(
            f"Spectra have {spectra.shape[-1]} bins, model expects {cfg.feature_dim}"
        )
    normalized = g.layer_norm(constant(spectra), params['input_norm.gain'], params['input_norm.bias'])
    if not cfg.relational:
        return normalized
    if relational is None:
        relational = relational_features(normalize_spectra(spectra))
    return g.concat([normalized, constant(relational)], axis=-1)


def _transposed(g: OpGraph, weight: Tensor) -> Tensor:
    return g.transpose(weight, (1, 0))


def channel_attention(
    g: OpGraph,
    x: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
    cfg: ModelConfig,
) -> Tensor:
    """
    Multi-head self-attention across channels, applied to every frame

    Per head, queries, keys and values are affine maps of each channel's
    feature vector; for each output channel the weights over source channels
    are a softmax of the query-key dot products. Head outputs are
    concatenated, passed through a position-wise ReLU layer back to N, and
    added to the input. The output permutes with the input channels.

    Args:
        g: Graph to record into
        x: Features (C, T, N_in)
        params: Layer parameters under prefix
        prefix: Parameter name prefix (e.g. block0.attn)
        cfg: Model configuration

    Returns:
        Features (C, T, N)
    """
    n = cfg.feature_dim
    frames = g.transpose(x, (1, 0, 2))  # (T, C, N_in)

    heads: List[Tensor] = []
    for i in range(cfg.num_heads):
        head = f"{prefix}.head{i}"
        q = g.affine(frames, _transposed(g, params[f"{head}.WQ"]), params[f"{head}.bQ"])
        k = g.affine(frames, _transposed(g, params[f"{head}.WK"]), params[f"{head}.bK"])
        v = g.affine(frames, _transposed(g, params[f"{head}.WV"]), params[f"{head}.bV"])

        similarity = g.matmul(q, g.transpose(k, (0, 2, 1)))  # (T, C_out, C_src)
        if cfg.scaled_attention:
            similarity = g.scale(similarity, 1.0 / math.sqrt(cfg.embed_dim))
        weights = g.softmax(similarity, axis=-1)
        heads.append(g.matmul(weights, v))  # (T, C, E)

    stacked = heads[0] if len(heads) == 1 else g.concat(heads, axis=-1)
    out = g.relu(g.affine(stacked, _transposed(g, params[f"{prefix}.ffn.W"]), params[f"{prefix}.ffn.b"]))

    residual = frames
    if frames.shape[-1] != n:
        # relational input: the residual carries the spectral half
        residual = g.slice(frames, (_ALL, _ALL, slice(0, n)))
    out = g.add(out, residual)
    return g.transpose(out, (1, 0, 2))


def _recurrence(
    g: OpGraph,
    projected: Tensor,
    w_hh_t: Tensor,
    hidden: int,
    reverse: bool,
) -> Tensor:
    """One LSTM direction over time; projected holds x W_ih^T + b as (C, T, 4H)"""
    num_frames = projected.shape[1]
    steps = range(num_frames - 1, -1, -1) if reverse else range(num_frames)
    h: Optional[Tensor] = None
    c: Optional[Tensor] = None
    outputs: List[Tensor] = []

    for t in steps:
        z = g.slice(projected, (_ALL, slice(t, t + 1), _ALL))  # (C, 1, 4H)
        if h is not None:
            z = g.add(z, g.matmul(h, w_hh_t))
        i_gate = g.sigmoid(g.slice(z, (_ALL, _ALL, slice(0, hidden))))
        f_gate = g.sigmoid(g.slice(z, (_ALL, _ALL, slice(hidden, 2 * hidden))))
        cell = g.tanh(g.slice(z, (_ALL, _ALL, slice(2 * hidden, 3 * hidden))))
        o_gate = g.sigmoid(g.slice(z, (_ALL, _ALL, slice(3 * hidden, 4 * hidden))))

        update = g.mul(i_gate, cell)
        c = update if c is None else g.add(g.mul(f_gate, c), update)
        h = g.mul(o_gate, g.tanh(c))
        outputs.append(h)

    if reverse:
        outputs.reverse()
    return outputs[0] if len(outputs) == 1 else g.concat(outputs, axis=1)


def temporal_layer(
    g: OpGraph,
    x: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
    cfg: ModelConfig,
) -> Tensor:
    """
    Bidirectional LSTM with output projection, shared by every channel

    Each channel is processed independently with the same parameters; initial
    states are zero.

    Args:
        g: Graph to record into
        x: Features (C, T, N_in)
        params: Layer parameters under prefix
        prefix: Parameter name prefix (e.g. block0.rnn)
        cfg: Model configuration

    Returns:
        Features (C, T, N)
    """
    hidden = cfg.hidden_size
    directions = []
    for name, reverse in (('fwd', False), ('bwd', True)):
        projected = g.affine(x, _transposed(g, params[f"{prefix}.{name}.W_ih"]), params[f"{prefix}.{name}.b"])
        w_hh_t = _transposed(g, params[f"{prefix}.{name}.W_hh"])
        directions.append(_recurrence(g, projected, w_hh_t, hidden, reverse))

    states = g.concat(directions, axis=-1)  # (C, T, 2H)
    return g.affine(states, _transposed(g, params[f"{prefix}.proj.W"]), params[f"{prefix}.proj.b"])


def mask_heads(g: OpGraph, pooled: Tensor, params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """
    Independent affine + sigmoid heads, one per source

    Args:
        g: Graph to record into
        pooled: Single-stream features (T, N)
        params: Holds head{k}.W / head{k}.b
        cfg: Model configuration

    Returns:
        Masks (S, T, F) in [0, 1]
    """
    num_frames = pooled.shape[0]
    masks = []
    for k in range(cfg.num_sources):
        logits = g.affine(pooled, _transposed(g, params[f"head{k}.W"]), params[f"head{k}.b"])
        masks.append(g.reshape(g.sigmoid(logits), (1, num_frames, cfg.num_bins)))
    return g.concat(masks, axis=0)
