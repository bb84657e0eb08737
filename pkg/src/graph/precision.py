"""
Global floating-point precision mode for the graph engine
"""
import numpy as np

from config.settings import DEFAULT_PRECISION

_MODES = {'float32': np.float32, 'float64': np.float64}
_current = DEFAULT_PRECISION


def set_precision(mode: str) -> None:
    """
    Select the precision used for every tensor created afterwards

    Args:
        mode: 'float32' (runtime default) or 'float64' (gradient checks)
    """
    global _current
    if mode not in _MODES:
        raise ValueError(f"Unknown precision mode: {mode} (expected one of {sorted(_MODES)})")
    _current = mode


def get_precision() -> str:
    """Name of the active precision mode"""
    return _current


def get_dtype() -> type:
    """numpy dtype of the active precision mode"""
    return _MODES[_current]


class precision:
    """Context manager that switches precision and restores the previous mode"""

    def __init__(self, mode: str):
        self.mode = mode
        self._previous = None

    def __enter__(self):
        self._previous = get_precision()
        set_precision(self.mode)
        return self

    def __exit__(self, *exc):
        set_precision(self._previous)
        return False
