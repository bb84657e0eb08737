from .stft import (
    StftConfig,
    MultiChannelWave,
    ComplexSpectrogram,
    stft,
    istft,
    istft_array,
    istft_adjoint_array,
)
from .wavio import read_wav, write_wav, read_multichannel, write_multichannel

__all__ = [
    'StftConfig', 'MultiChannelWave', 'ComplexSpectrogram', 'stft', 'istft',
    'istft_array', 'istft_adjoint_array',
    'read_wav', 'write_wav', 'read_multichannel', 'write_multichannel',
]
