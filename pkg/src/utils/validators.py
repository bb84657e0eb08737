"""
Input validation utilities
"""
from typing import Sequence, Type

import numpy as np

from .errors import AdsepError, DataError, ShapeError


class Validators:
    """Argument checks used across the pipeline"""

    @staticmethod
    def require_finite(array: np.ndarray, what: str, error: Type[AdsepError] = DataError) -> None:
        """
        Raise if an array holds NaN or infinite values

        Args:
            array: Array to check
            what: Name used in the error message
            error: Error class to raise; NumericError inside computations
        """
        if not np.all(np.isfinite(array)):
            raise error(f"{what} contains non-finite values")

    @staticmethod
    def require_same_length(a: np.ndarray, b: np.ndarray, what: str) -> None:
        """
        Raise if two signals differ in length along their last axis

        Args:
            a: First signal
            b: Second signal
            what: Name used in the error message
        """
        if a.shape[-1] != b.shape[-1]:
            raise ShapeError(f"{what}: length mismatch {a.shape[-1]} vs {b.shape[-1]}")

    @staticmethod
    def require_shape(array: np.ndarray, shape: Sequence[int], what: str) -> None:
        """
        Raise unless an array has exactly the given shape

        Args:
            array: Array to check
            shape: Expected shape
            what: Name used in the error message
        """
        if tuple(array.shape) != tuple(shape):
            raise ShapeError(f"{what}: expected shape {tuple(shape)}, got {tuple(array.shape)}")

    @staticmethod
    def require_channel(index: int, num_channels: int) -> None:
        """
        Raise unless a channel index addresses one of num_channels channels

        Args:
            index: Channel index
            num_channels: Number of available channels
        """
        if not 0 <= index < num_channels:
            raise ValueError(f"Channel index {index} out of range for {num_channels} channels")

    @staticmethod
    def validate_ratio(value: float, field_name: str) -> None:
        """
        Raise unless value lies in [0, 1]

        Args:
            value: Value to check
            field_name: Name of the field for the error message
        """
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{field_name} must be between 0 and 1, got {value}")
