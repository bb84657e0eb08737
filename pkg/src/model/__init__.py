from .config import ModelConfig
from .params import init_params, expected_shapes, validate_params, params_from_arrays
from .layers import (
    input_features,
    channel_attention,
    temporal_layer,
    relational_features,
    normalize_spectra,
)
from .network import (
    MaskSet,
    SpatioTemporalNet,
    SingleChannelNet,
    build_network,
    forward,
    single_channel_forward,
    load_network,
    network_metadata,
)
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    'ModelConfig', 'init_params', 'expected_shapes', 'validate_params', 'params_from_arrays',
    'input_features', 'channel_attention', 'temporal_layer', 'relational_features',
    'normalize_spectra', 'MaskSet', 'SpatioTemporalNet', 'SingleChannelNet', 'build_network',
    'forward', 'single_channel_forward', 'load_network', 'network_metadata',
    'save_checkpoint', 'load_checkpoint',
]
