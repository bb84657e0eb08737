from .metrics import SeparationMetrics, ROW_COLUMNS
from .harness import (
    SystemSpec,
    EvalReport,
    run_matrix,
    select_channels,
    oracle_masks,
    separate_with,
    parse_channel_sweep,
)
from .plots import sweep_figure, training_figure, write_figure

__all__ = [
    'SeparationMetrics', 'ROW_COLUMNS',
    'SystemSpec', 'EvalReport', 'run_matrix', 'select_channels', 'oracle_masks', 'separate_with',
    'parse_channel_sweep', 'sweep_figure', 'training_figure', 'write_figure',
]
