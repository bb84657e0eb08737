from .scenario import SimulationRanges, RoomScenario, sample_scenario, check_scenario
from .rir import RirSet, image_method_rir, image_sources, compute_rirs, fractional_delay_kernel
from .sources import SourcePool, NoisePool, synthetic_utterance
from .mixture import MixtureComponents, render_components, render_mixture, source_offsets, peak_normalize
from .dataset import build_dataset, read_manifest, load_example, load_examples, example_rng

__all__ = [
    'SimulationRanges', 'RoomScenario', 'sample_scenario', 'check_scenario',
    'RirSet', 'image_method_rir', 'image_sources', 'compute_rirs', 'fractional_delay_kernel',
    'SourcePool', 'NoisePool', 'synthetic_utterance',
    'MixtureComponents', 'render_components', 'render_mixture', 'source_offsets', 'peak_normalize',
    'build_dataset', 'read_manifest', 'load_example', 'load_examples', 'example_rng',
]
