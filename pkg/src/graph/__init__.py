from .precision import set_precision, get_precision, get_dtype, precision
from .tensor import Tensor, OpGraph, OpRecord, forward_op, backward, constant
from .gradcheck import grad_check, numeric_gradients, relative_error

__all__ = [
    'set_precision', 'get_precision', 'get_dtype', 'precision',
    'Tensor', 'OpGraph', 'OpRecord', 'forward_op', 'backward', 'constant',
    'grad_check', 'numeric_gradients', 'relative_error',
]
