"""
Learning-rate decay on validation plateaus
"""
from typing import Any, Dict, List, Optional, Sequence

from config.settings import LR_DECAY_FACTOR, PLATEAU_PATIENCE


class PlateauScheduler:
    """
    Multiplies the learning rate by a factor once the best validation score
    has not improved for `patience` consecutive epochs; the counter restarts
    after every improvement and every decay.
    """

    def __init__(self, lr: float, patience: int = PLATEAU_PATIENCE, factor: float = LR_DECAY_FACTOR):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        if not 0 < factor < 1:
            raise ValueError(f"decay factor must be in (0, 1), got {factor}")
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best: Optional[float] = None
        self.stale_epochs = 0
        self.num_decays = 0

    def step(self, score: float) -> bool:
        """
        Record one epoch's validation score (higher is better)

        Args:
            score: Validation SI-SNR of the epoch

        Returns:
            True if the learning rate was decayed after this epoch
        """
        if self.best is None or score > self.best:
            self.best = score
            self.stale_epochs = 0
            return False

        self.stale_epochs += 1
        if self.stale_epochs >= self.patience:
            self.lr *= self.factor
            self.stale_epochs = 0
            self.num_decays += 1
            return True
        return False

    def state_dict(self) -> Dict[str, Any]:
        return {'lr': self.lr, 'best': self.best, 'stale_epochs': self.stale_epochs,
                'num_decays': self.num_decays}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.lr = state['lr']
        self.best = state['best']
        self.stale_epochs = state['stale_epochs']
        self.num_decays = state['num_decays']


def decay_epochs(
    scores: Sequence[float],
    patience: int = PLATEAU_PATIENCE,
    factor: float = LR_DECAY_FACTOR,
) -> List[int]:
    """
    1-based epochs after which the learning rate decays for a score sequence

    Args:
        scores: Validation score per epoch
        patience: Non-improving epochs tolerated
        factor: Decay factor

    Returns:
        Epoch numbers with a decay
    """
    scheduler = PlateauScheduler(1.0, patience, factor)
    return [epoch for epoch, score in enumerate(scores, start=1) if scheduler.step(score)]
