"""
Adaptive-moment optimizer and gradient clipping
"""
import logging
from typing import Dict, Mapping, Tuple

import numpy as np

from config.settings import ADAM_BETAS, ADAM_EPS
from src.graph.tensor import Tensor

logger = logging.getLogger(__name__)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Rescale gradients so that their joint L2 norm is at most max_norm

    Args:
        grads: Named gradients
        max_norm: Norm limit

    Returns:
        Tuple of (clipped gradients, norm before clipping)
    """
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


class Adam:
    """First-order adaptive moment estimation with bias correction"""

    def __init__(self, betas: Tuple[float, float] = ADAM_BETAS, eps: float = ADAM_EPS):
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], lr: float) -> None:
        """
        Update params in place

        Args:
            params: Named parameter tensors
            grads: Gradient per parameter name
            lr: Learning rate for this step
        """
        self.step_count += 1
        bias1 = 1 - self.beta1 ** self.step_count
        bias2 = 1 - self.beta2 ** self.step_count
        for name, tensor in params.items():
            grad = grads[name]
            m = self.m.get(name, np.zeros_like(tensor.data))
            v = self.v.get(name, np.zeros_like(tensor.data))
            m = self.beta1 * m + (1 - self.beta1) * grad
            v = self.beta2 * v + (1 - self.beta2) * grad ** 2
            self.m[name], self.v[name] = m, v
            update = lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            tensor.data = (tensor.data - update).astype(tensor.data.dtype)

    def state_tensors(self) -> Dict[str, np.ndarray]:
        """Moments keyed for the checkpoint (optim.m.<name>, optim.v.<name>)"""
        state = {f"optim.m.{k}": v for k, v in self.m.items()}
        state.update({f"optim.v.{k}": v for k, v in self.v.items()})
        return state

    def load_state(self, tensors: Mapping[str, np.ndarray], step_count: int) -> None:
        """Restore moments written by state_tensors"""
        self.m = {k[len('optim.m.'):]: v for k, v in tensors.items() if k.startswith('optim.m.')}
        self.v = {k[len('optim.v.'):]: v for k, v in tensors.items() if k.startswith('optim.v.')}
        self.step_count = step_count
        logger.debug("Restored optimizer state at step %d (%d moments)", step_count, len(self.m))
