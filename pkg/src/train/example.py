"""
Training example container
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from src.dsp.stft import MultiChannelWave
from src.utils.errors import ShapeError


@dataclass
class TrainingExample:
    """A multi-channel mixture with its per-source reference images"""
    example_id: str
    mixture: MultiChannelWave
    references: np.ndarray  # (S, L), zero-padded to the mixture span
    metadata: Dict[str, Any] = field(default_factory=dict)
    activity: Optional[np.ndarray] = None  # (S, L) bool, source active flags

    def __post_init__(self):
        self.references = np.atleast_2d(np.asarray(self.references, dtype=np.float64))
        if self.references.shape[1] != self.mixture.length:
            raise ShapeError(
                f"Example {self.example_id}: references span {self.references.shape[1]} samples, "
                f"mixture {self.mixture.length}"
            )
        if self.activity is not None and self.activity.shape != self.references.shape:
            raise ShapeError(f"Example {self.example_id}: activity shape {self.activity.shape} "
                             f"does not match references {self.references.shape}")

    @property
    def num_sources(self) -> int:
        return self.references.shape[0]

    def select_channels(self, channels) -> 'TrainingExample':
        """Same example observed through a subset of its microphones"""
        return TrainingExample(self.example_id, self.mixture.select(channels), self.references,
                               dict(self.metadata), self.activity)
