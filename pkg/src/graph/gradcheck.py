"""
Finite-difference verification of analytic gradients
"""
from typing import Callable, Dict, Mapping

import numpy as np

from config.settings import GRAD_CHECK_EPS
from .precision import get_precision
from .tensor import OpGraph, Tensor, backward

ScalarFn = Callable[[OpGraph, Mapping[str, Tensor]], Tensor]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise"""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / scale


def numeric_gradients(
    f: ScalarFn,
    params: Mapping[str, Tensor],
    eps: float = GRAD_CHECK_EPS,
) -> Dict[str, np.ndarray]:
    """
    Central-difference gradient of f with respect to every parameter entry

    Args:
        f: Builds the scalar loss in a fresh graph from params
        params: Named parameter tensors (perturbed in place, then restored)
        eps: Perturbation size

    Returns:
        Map of parameter name to numeric gradient
    """
    result = {}
    for name, tensor in params.items():
        tensor.data = np.ascontiguousarray(tensor.data)
        grad = np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = f(OpGraph(), params).item()
            flat[i] = original - eps
            minus = f(OpGraph(), params).item()
            flat[i] = original
            grad.reshape(-1)[i] = (plus - minus) / (2 * eps)
        result[name] = grad
    return result


def grad_check(f: ScalarFn, params: Mapping[str, Tensor], eps: float = GRAD_CHECK_EPS) -> float:
    """
    Worst relative error between analytic and central-difference gradients

    Args:
        f: Deterministic scalar function of params, built in the given graph
        params: Named parameter tensors with requires_grad set
        eps: Finite-difference step

    Returns:
        Max over all parameter entries of |analytic - cd| / max(|analytic|, |cd|, 1e-8)
    """
    if get_precision() != 'float64':
        raise ValueError("grad_check requires float64 precision")

    graph = OpGraph()
    loss = f(graph, params)
    analytic = backward(graph, loss, params)
    numeric = numeric_gradients(f, params, eps)

    worst = 0.0
    for name in params:
        if analytic[name].size:
            worst = max(worst, float(relative_error(analytic[name], numeric[name]).max()))
    return worst
