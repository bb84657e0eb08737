from .example import TrainingExample
from .objectives import (
    si_snr,
    pit_loss,
    pit_scores,
    best_permutation,
    si_snr_graph,
    pit_loss_graph,
    scale_allowing_sdr,
)
from .optimizer import Adam, clip_by_global_norm, global_norm
from .scheduler import PlateauScheduler, decay_epochs
from .trainer import (
    TrainConfig,
    Trainer,
    training_step,
    evaluate_loss,
    mixture_sisnr,
    read_log,
)

__all__ = [
    'TrainingExample', 'si_snr', 'pit_loss', 'pit_scores', 'best_permutation', 'si_snr_graph',
    'pit_loss_graph', 'scale_allowing_sdr', 'Adam', 'clip_by_global_norm', 'global_norm', 'PlateauScheduler',
    'decay_epochs', 'TrainConfig', 'Trainer', 'training_step', 'evaluate_loss',
    'mixture_sisnr', 'read_log',
]
