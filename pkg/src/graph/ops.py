"""
Forward and backward rules for every op kind the graph supports

Each rule's forward takes the input arrays (plus keyword attributes) and returns
(output, saved); its backward takes (grad, saved) and returns one gradient per
input, None where an input is not differentiable.
"""
from typing import Any, Callable, Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from config.settings import LAYER_NORM_EPS
from src.utils.errors import NumericError, ShapeError

Saved = Dict[str, Any]


class OpRule(NamedTuple):
    forward: Callable[..., Tuple[np.ndarray, Saved]]
    backward: Callable[[np.ndarray, Saved], Sequence[Optional[np.ndarray]]]


def _mismatch(kind: str, *shapes) -> ShapeError:
    joined = ' vs '.join(str(tuple(s)) for s in shapes)
    return ShapeError(f"{kind}: incompatible shapes {joined}")


def _require_same(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise _mismatch(kind, a.shape, b.shape)


# Linear algebra

def _matmul_forward(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise _mismatch('matmul', a.shape, b.shape)
    if b.ndim != 2 and a.shape[:-2] != b.shape[:-2]:
        raise _mismatch('matmul', a.shape, b.shape)
    return a @ b, {'a': a, 'b': b}


def _matmul_backward(g, s):
    a, b = s['a'], s['b']
    grad_a = g @ np.swapaxes(b, -1, -2)
    if b.ndim == 2:
        grad_b = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
    else:
        grad_b = np.swapaxes(a, -1, -2) @ g
    return grad_a, grad_b


def _add_forward(a, b):
    if a.shape != b.shape and not (b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]):
        raise _mismatch('add', a.shape, b.shape)
    return a + b, {'bias': a.shape != b.shape}


def _add_backward(g, s):
    if s['bias']:
        return g, g.reshape(-1, g.shape[-1]).sum(axis=0)
    return g, g


def _sub_forward(a, b):
    _require_same('sub', a, b)
    return a - b, {}


def _mul_forward(a, b):
    _require_same('mul', a, b)
    return a * b, {'a': a, 'b': b}


def _div_forward(a, b):
    _require_same('div', a, b)
    return a / b, {'a': a, 'b': b}


def _scale_forward(a, factor: float):
    return a * factor, {'factor': factor}


# Structure

def _concat_forward(*arrays, axis: int):
    ref = arrays[0]
    ax = axis % ref.ndim
    for arr in arrays[1:]:
        if arr.ndim != ref.ndim or any(
            arr.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != ax
        ):
            raise _mismatch('concat', *[x.shape for x in arrays])
    sizes = [arr.shape[ax] for arr in arrays]
    return np.concatenate(arrays, axis=ax), {'axis': ax, 'splits': np.cumsum(sizes)[:-1]}


def _concat_backward(g, s):
    return np.split(g, s['splits'], axis=s['axis'])


def _slice_forward(a, index):
    try:
        out = a[index]
    except IndexError as e:
        raise ShapeError(f"slice: index {index} invalid for shape {a.shape}") from e
    return np.array(out), {'shape': a.shape, 'index': index}


def _slice_backward(g, s):
    grad = np.zeros(s['shape'], dtype=g.dtype)
    grad[s['index']] = g
    return (grad,)


def _transpose_forward(a, axes: Tuple[int, ...]):
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {a.shape}")
    return np.transpose(a, axes), {'inverse': tuple(np.argsort(axes))}


def _reshape_forward(a, shape: Tuple[int, ...]):
    try:
        out = a.reshape(shape)
    except ValueError as e:
        raise _mismatch('reshape', a.shape, shape) from e
    return out, {'shape': a.shape}


def _mean_forward(a, axis: int):
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"mean: axis {axis} invalid for shape {a.shape}")
    return a.mean(axis=axis), {'shape': a.shape, 'axis': axis % a.ndim}


def _mean_backward(g, s):
    expanded = np.expand_dims(g, s['axis'])
    return (np.broadcast_to(expanded, s['shape']) / s['shape'][s['axis']],)


def _sum_forward(a, axis: Optional[int] = None):
    return np.asarray(a.sum(axis=axis)), {'shape': a.shape, 'axis': axis}


def _sum_backward(g, s):
    if s['axis'] is None:
        return (np.full(s['shape'], g, dtype=g.dtype),)
    expanded = np.expand_dims(g, s['axis'] % len(s['shape']))
    return (np.broadcast_to(expanded, s['shape']).copy(),)


# Nonlinearities

def _sigmoid_forward(a):
    y = expit(a)
    return y, {'y': y}


def _tanh_forward(a):
    y = np.tanh(a)
    return y, {'y': y}


def _relu_forward(a):
    return np.maximum(a, 0), {'mask': a > 0}


def _log_forward(a):
    if np.any(a <= 0):
        raise NumericError("log: input must be positive")
    return np.log(a), {'a': a}


def _softmax_forward(a, axis: int):
    shifted = a - a.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    return y, {'y': y, 'axis': axis}


def _softmax_backward(g, s):
    y = s['y']
    return (y * (g - (g * y).sum(axis=s['axis'], keepdims=True)),)


def _layer_norm_forward(x, gain, bias, eps: float = LAYER_NORM_EPS):
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise _mismatch('layer_norm', x.shape, gain.shape, bias.shape)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gain + bias, {'xhat': xhat, 'inv_std': inv_std, 'gain': gain}


def _layer_norm_backward(g, s):
    xhat, inv_std, gain = s['xhat'], s['inv_std'], s['gain']
    n = xhat.shape[-1]
    gx_hat = g * gain
    grad_x = inv_std / n * (
        n * gx_hat
        - gx_hat.sum(axis=-1, keepdims=True)
        - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True)
    )
    flat = g.reshape(-1, n)
    grad_gain = (flat * xhat.reshape(-1, n)).sum(axis=0)
    grad_bias = flat.sum(axis=0)
    return grad_x, grad_gain, grad_bias


def _linear_map_forward(a, fn: Callable, adjoint: Callable, label: str = 'linear_map'):
    return np.asarray(fn(a)), {'adjoint': adjoint, 'shape': a.shape}


def _linear_map_backward(g, s):
    grad = np.asarray(s['adjoint'](g))
    if grad.shape != s['shape']:
        raise _mismatch('linear_map adjoint', grad.shape, s['shape'])
    return (grad,)


OPS: Dict[str, OpRule] = {
    'matmul': OpRule(_matmul_forward, _matmul_backward),
    'add': OpRule(_add_forward, _add_backward),
    'sub': OpRule(_sub_forward, lambda g, s: (g, -g)),
    'mul': OpRule(_mul_forward, lambda g, s: (g * s['b'], g * s['a'])),
    'div': OpRule(_div_forward, lambda g, s: (g / s['b'], -g * s['a'] / s['b'] ** 2)),
    'scale': OpRule(_scale_forward, lambda g, s: (g * s['factor'],)),
    'concat': OpRule(_concat_forward, _concat_backward),
    'slice': OpRule(_slice_forward, _slice_backward),
    'transpose': OpRule(_transpose_forward, lambda g, s: (np.transpose(g, s['inverse']),)),
    'reshape': OpRule(_reshape_forward, lambda g, s: (g.reshape(s['shape']),)),
    'mean': OpRule(_mean_forward, _mean_backward),
    'sum': OpRule(_sum_forward, _sum_backward),
    'sigmoid': OpRule(_sigmoid_forward, lambda g, s: (g * s['y'] * (1 - s['y']),)),
    'tanh': OpRule(_tanh_forward, lambda g, s: (g * (1 - s['y'] ** 2),)),
    'relu': OpRule(_relu_forward, lambda g, s: (g * s['mask'],)),
    'log': OpRule(_log_forward, lambda g, s: (g / s['a'],)),
    'softmax': OpRule(_softmax_forward, _softmax_backward),
    'layer_norm': OpRule(_layer_norm_forward, _layer_norm_backward),
    'linear_map': OpRule(_linear_map_forward, _linear_map_backward),
}
