"""
Tensors and the recorded op graph used for reverse-mode differentiation
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import NumericError, ShapeError
from src.utils.validators import Validators
from .ops import OPS
from .precision import get_dtype

MAX_RANK = 4


class Tensor:
    """n-dimensional real array, optionally tracked for gradients"""

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        check: bool = True,
    ):
        self.data = np.asarray(data, dtype=get_dtype())
        self.requires_grad = requires_grad
        self.name = name
        self.node: Optional[int] = None
        self.grad: Optional[np.ndarray] = None
        if check:
            if self.data.ndim > MAX_RANK:
                raise ShapeError(f"Tensor rank {self.data.ndim} exceeds {MAX_RANK}")
            Validators.require_finite(self.data, f"Tensor {name or ''}".strip(), NumericError)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ''
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class OpRecord:
    """One recorded op application"""
    kind: str
    inputs: List[Tensor]
    output: Tensor
    saved: Dict[str, Any] = field(default_factory=dict)

    @property
    def input_ids(self) -> List[Optional[int]]:
        return [t.node for t in self.inputs]


class OpGraph:
    """
    Topologically ordered record of op applications

    Nodes are appended as ops run, so every node's inputs precede it. Only ops
    whose output depends on a requires_grad tensor are recorded.
    """

    def __init__(self):
        self.nodes: List[OpRecord] = []

    def apply(self, kind: str, *inputs: Tensor, **attrs) -> Tensor:
        """
        Run one op and record it

        Args:
            kind: Op kind (a key of OPS)
            *inputs: Input tensors
            **attrs: Non-tensor op attributes (axis, index, factor, ...)

        Returns:
            Output tensor
        """
        if kind not in OPS:
            raise ValueError(f"Unknown op kind: {kind}")
        out_data, saved = OPS[kind].forward(*[t.data for t in inputs], **attrs)
        tracked = any(t.requires_grad for t in inputs)
        out = Tensor(out_data, requires_grad=tracked, check=False)
        if tracked:
            out.node = len(self.nodes)
            self.nodes.append(OpRecord(kind, list(inputs), out, saved))
        return out

    @property
    def outputs(self) -> List[int]:
        """Ids of nodes whose output feeds no other node"""
        consumed = {i for node in self.nodes for i in node.input_ids if i is not None}
        return [i for i in range(len(self.nodes)) if i not in consumed]

    # Convenience wrappers, one per op kind

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        return self.apply('matmul', a, b)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        return self.apply('add', a, b)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        return self.apply('sub', a, b)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        return self.apply('mul', a, b)

    def div(self, a: Tensor, b: Tensor) -> Tensor:
        return self.apply('div', a, b)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        return self.apply('scale', a, factor=factor)

    def concat(self, tensors: Sequence[Tensor], axis: int) -> Tensor:
        return self.apply('concat', *tensors, axis=axis)

    def slice(self, a: Tensor, index) -> Tensor:
        return self.apply('slice', a, index=index)

    def transpose(self, a: Tensor, axes: Sequence[int]) -> Tensor:
        return self.apply('transpose', a, axes=tuple(axes))

    def reshape(self, a: Tensor, shape: Sequence[int]) -> Tensor:
        return self.apply('reshape', a, shape=tuple(shape))

    def mean(self, a: Tensor, axis: int) -> Tensor:
        return self.apply('mean', a, axis=axis)

    def sum(self, a: Tensor, axis: Optional[int] = None) -> Tensor:
        return self.apply('sum', a, axis=axis)

    def sigmoid(self, a: Tensor) -> Tensor:
        return self.apply('sigmoid', a)

    def tanh(self, a: Tensor) -> Tensor:
        return self.apply('tanh', a)

    def relu(self, a: Tensor) -> Tensor:
        return self.apply('relu', a)

    def log(self, a: Tensor) -> Tensor:
        return self.apply('log', a)

    def softmax(self, a: Tensor, axis: int) -> Tensor:
        return self.apply('softmax', a, axis=axis)

    def layer_norm(self, x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
        return self.apply('layer_norm', x, gain, bias)

    def linear_map(self, a: Tensor, fn: Callable, adjoint: Callable, label: str = 'linear_map') -> Tensor:
        return self.apply('linear_map', a, fn=fn, adjoint=adjoint, label=label)

    def affine(self, x: Tensor, weight_t: Tensor, bias: Tensor) -> Tensor:
        """x @ weight_t + bias, with weight_t already transposed to (in, out)"""
        return self.add(self.matmul(x, weight_t), bias)


def forward_op(graph: OpGraph, kind: str, *inputs: Tensor, **attrs) -> Tensor:
    """Record one op of the given kind in graph"""
    return graph.apply(kind, *inputs, **attrs)


def constant(data: Any, name: Optional[str] = None) -> Tensor:
    """Untracked tensor"""
    return Tensor(data, requires_grad=False, name=name)


def backward(
    graph: OpGraph,
    loss: Tensor,
    params: Optional[Mapping[str, Tensor]] = None,
) -> Dict[str, np.ndarray]:
    """
    Reverse-mode sweep from a scalar loss

    Args:
        graph: Graph that produced loss
        loss: Scalar loss tensor
        params: Named leaf tensors to report gradients for

    Returns:
        Map of parameter name to gradient; parameters the loss does not use get
        zero gradients. Each leaf's .grad is set as well.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        grad = grads.pop(id(node.output), None)
        if grad is None:
            continue
        input_grads = OPS[node.kind].backward(grad, node.saved)
        for tensor, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + input_grad
            else:
                grads[key] = np.asarray(input_grad, dtype=tensor.data.dtype)

    result: Dict[str, np.ndarray] = {}
    for name, tensor in (params or {}).items():
        grad = grads.get(id(tensor))
        tensor.grad = np.zeros_like(tensor.data) if grad is None else grad.reshape(tensor.shape)
        result[name] = tensor.grad
    return result
