from .config import RunConfig
from .commands import run_simulate, run_train, run_separate, run_evaluate, build_systems, load_matrix
from .main import build_parser, main

__all__ = [
    'RunConfig', 'run_simulate', 'run_train', 'run_separate', 'run_evaluate', 'build_systems',
    'load_matrix', 'build_parser', 'main',
]
