"""
Parameter naming, shapes and initialization

Names are stable identifiers shared with the checkpoint format:

    input_norm.gain, input_norm.bias
    block{b}.attn.head{i}.WQ / .bQ / .WK / .bK / .WV / .bV
    block{b}.attn.ffn.W / .ffn.b
    block{b}.rnn.fwd.W_ih / .W_hh / .b, block{b}.rnn.bwd.*, block{b}.rnn.proj.W / .proj.b
    fusion.attn.*                      (interleaved topology only)
    rnn{l}.*                           (single-channel architecture)
    head{k}.W / head{k}.b
"""
from collections import OrderedDict
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from config.settings import FORGET_BIAS_INIT
from src.graph.tensor import Tensor
from src.utils.errors import ConfigError
from src.utils.validators import Validators
from .config import ModelConfig

Params = Dict[str, Tensor]
Shape = Tuple[int, ...]


def attention_shapes(prefix: str, cfg: ModelConfig, in_dim: int) -> Iterator[Tuple[str, Shape]]:
    e = cfg.embed_dim
    for i in range(cfg.num_heads):
        for proj in ('Q', 'K', 'V'):
            yield f"{prefix}.head{i}.W{proj}", (e, in_dim)
            yield f"{prefix}.head{i}.b{proj}", (e,)
    yield f"{prefix}.ffn.W", (cfg.feature_dim, e * cfg.num_heads)
    yield f"{prefix}.ffn.b", (cfg.feature_dim,)


def temporal_shapes(prefix: str, cfg: ModelConfig, in_dim: int) -> Iterator[Tuple[str, Shape]]:
    h = cfg.hidden_size
    for direction in ('fwd', 'bwd'):
        yield f"{prefix}.{direction}.W_ih", (4 * h, in_dim)
        yield f"{prefix}.{direction}.W_hh", (4 * h, h)
        yield f"{prefix}.{direction}.b", (4 * h,)
    yield f"{prefix}.proj.W", (cfg.feature_dim, 2 * h)
    yield f"{prefix}.proj.b", (cfg.feature_dim,)


def expected_shapes(cfg: ModelConfig) -> 'OrderedDict[str, Shape]':
    """
    Parameter name -> shape for a configuration

    Args:
        cfg: Model configuration

    Returns:
        Ordered mapping in creation order
    """
    n = cfg.feature_dim
    shapes: 'OrderedDict[str, Shape]' = OrderedDict()
    shapes['input_norm.gain'] = (n,)
    shapes['input_norm.bias'] = (n,)

    if cfg.architecture == 'spatiotemporal':
        for b in range(cfg.num_blocks):
            in_dim = cfg.input_dim if b == 0 else n
            shapes.update(attention_shapes(f"block{b}.attn", cfg, in_dim))
            # stacked topology feeds the first rnn from the attention stack (width N)
            shapes.update(temporal_shapes(f"block{b}.rnn", cfg, n))
        if cfg.topology == 'interleaved':
            shapes.update(attention_shapes("fusion.attn", cfg, n))
    else:
        for layer in range(cfg.single_channel_layers):
            in_dim = cfg.input_dim if layer == 0 else n
            shapes.update(temporal_shapes(f"rnn{layer}", cfg, in_dim))

    for k in range(cfg.num_sources):
        shapes[f"head{k}.W"] = (cfg.num_bins, n)
        shapes[f"head{k}.b"] = (cfg.num_bins,)
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> Params:
    """
    Fresh parameters for a configuration

    Affine and recurrent matrices and their biases are drawn from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); layer-norm gain is 1 and bias 0;
    recurrent forget-gate biases start at FORGET_BIAS_INIT.

    Args:
        cfg: Model configuration
        rng: Seeded generator

    Returns:
        Named trainable tensors
    """
    shapes = expected_shapes(cfg)
    params: Params = {}
    for name, shape in shapes.items():
        if name == 'input_norm.gain':
            data = np.ones(shape)
        elif name == 'input_norm.bias':
            data = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(_fan_in(name, shapes))
            data = rng.uniform(-bound, bound, size=shape)
            if name.endswith(('fwd.b', 'bwd.b')):
                h = shape[0] // 4
                data[h:2 * h] = FORGET_BIAS_INIT
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def _fan_in(name: str, shapes: Mapping[str, Shape]) -> int:
    """Input width of the map a matrix or bias belongs to"""
    if len(shapes[name]) == 2:
        return shapes[name][1]
    owner, leaf = name.rsplit('.', 1)
    # bQ -> WQ, b -> W or W_ih
    for sibling in (f"{owner}.W{leaf[1:]}", f"{owner}.W_ih"):
        if sibling in shapes:
            return shapes[sibling][1]
    raise KeyError(f"No weight matrix found for bias {name}")


def validate_params(params: Mapping[str, Tensor], cfg: ModelConfig) -> None:
    """
    Raise if params do not match the shapes a configuration requires

    Args:
        params: Named tensors
        cfg: Model configuration
    """
    shapes = expected_shapes(cfg)
    missing = sorted(set(shapes) - set(params))
    extra = sorted(set(params) - set(shapes))
    if missing or extra:
        raise ConfigError(f"Parameters do not match config: missing {missing[:5]}, unexpected {extra[:5]}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise ConfigError(f"Parameter {name} has shape {params[name].shape}, config needs {shape}")


def params_from_arrays(arrays: Mapping[str, np.ndarray], cfg: ModelConfig) -> Params:
    """Wrap loaded arrays as trainable tensors and validate them against cfg"""
    shapes = expected_shapes(cfg)
    for name in shapes:
        if name in arrays:
            Validators.require_finite(arrays[name], f"Parameter {name}")
    params = {name: Tensor(arrays[name], requires_grad=True, name=name)
              for name in shapes if name in arrays}
    validate_params(params, cfg)
    return params


def count_parameters(params: Mapping[str, Tensor]) -> int:
    return int(sum(t.size for t in params.values()))
