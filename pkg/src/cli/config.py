"""
Run configuration: one flat JSON recipe, overridable from the command line
"""
import json
import logging
import typing
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.settings import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_NUM_CHANNELS,
    DEFAULT_PRECISION,
    DIAGONAL_LOADING,
    FFT_SIZE,
    GRAD_CLIP_NORM,
    HOP_SIZE,
    LR_DECAY_FACTOR,
    MAX_ORDER_TRAIN,
    MODEL_DEFAULTS,
    PLATEAU_PATIENCE,
    RIR_SECONDS,
    SAMPLE_RATE,
    SINGLE_CHANNEL_LAYERS,
    UTTERANCE_SECONDS,
)
from src.dsp.stft import StftConfig
from src.enhance.pipeline import EnhanceOptions
from src.model.config import ModelConfig
from src.train.trainer import TrainConfig
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

_MODEL_FIELDS = ('architecture', 'num_blocks', 'embed_dim', 'num_heads', 'hidden_size', 'topology',
                 'input_feature', 'scaled_attention', 'single_channel_layers')
_TRAIN_FIELDS = ('learning_rate', 'batch_size', 'max_epochs', 'plateau_patience', 'lr_decay_factor',
                 'grad_clip', 'seed', 'precision', 'jobs')
_ENHANCE_FIELDS = ('mode', 'ref_policy', 'vad', 'seed', 'loading')


class RunConfig(BaseModel):
    """
    Every tunable of the pipeline in one flat namespace

    Model, training, simulation and enhancement settings share a single
    key space so a recipe file reads as plain key/value pairs. The model's
    feature dimension is not a key: it always equals fft_size // 2 + 1.
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    # Analysis
    sample_rate: int = Field(SAMPLE_RATE, gt=0, description="Sample rate (Hz)")
    fft_size: int = Field(FFT_SIZE, ge=2, description="STFT frame length (samples)")
    hop: int = Field(HOP_SIZE, ge=1, description="STFT hop (samples)")

    # Model
    architecture: Literal['spatiotemporal', 'single_channel'] = Field(
        'spatiotemporal', description="Network family")
    num_blocks: int = Field(MODEL_DEFAULTS['num_blocks'], ge=1, description="Spatio-temporal blocks")
    embed_dim: int = Field(MODEL_DEFAULTS['embed_dim'], ge=1, description="Attention embedding size E")
    num_heads: int = Field(MODEL_DEFAULTS['num_heads'], ge=1, description="Attention heads D")
    hidden_size: int = Field(MODEL_DEFAULTS['hidden_size'], ge=1, description="LSTM cells per direction H")
    topology: Literal['interleaved', 'stacked'] = Field('interleaved', description="Block ordering")
    input_feature: Literal['magnitude', 'magnitude+relational'] = Field(
        'magnitude', description="Single-channel model input")
    scaled_attention: bool = Field(False, description="Divide attention scores by sqrt(E)")
    single_channel_layers: int = Field(SINGLE_CHANNEL_LAYERS, ge=1, description="Single-channel LSTM layers")

    # Training
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0, description="Initial Adam step size")
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1, description="Examples per update")
    max_epochs: int = Field(DEFAULT_MAX_EPOCHS, ge=1, description="Epoch limit")
    plateau_patience: int = Field(PLATEAU_PATIENCE, ge=1, description="Non-improving epochs before LR decay")
    lr_decay_factor: float = Field(LR_DECAY_FACTOR, gt=0, lt=1, description="LR multiplier on plateau")
    grad_clip: float = Field(GRAD_CLIP_NORM, gt=0, description="Global gradient-norm limit")
    precision: Literal['float32', 'float64'] = Field(DEFAULT_PRECISION, description="Graph float width")

    # Simulation
    channels: int = Field(DEFAULT_NUM_CHANNELS, ge=1, le=10, description="Microphones per example")
    max_order: int = Field(MAX_ORDER_TRAIN, ge=0, description="Image-method reflection order")
    utterance_seconds: float = Field(UTTERANCE_SECONDS, gt=0, description="Source length (s)")
    rir_seconds: float = Field(RIR_SECONDS, gt=0, description="Impulse-response length (s)")
    source_dir: Optional[str] = Field(None, description="Directory of speech WAVs (synthetic if unset)")
    noise_dir: Optional[str] = Field(None, description="Directory of noise WAVs (white if unset)")

    # Enhancement
    mode: Literal['masking', 'mvdr'] = Field('mvdr', description="Enhancement back end")
    ref_policy: Literal['max-snr', 'random', 'oracle'] = Field('max-snr', description="Reference selection")
    vad: Literal['none', 'oracle', 'energy'] = Field('none', description="Output gating")
    loading: float = Field(DIAGONAL_LOADING, ge=0, description="MVDR diagonal loading")

    # Shared
    seed: int = Field(0, description="Seed for every random choice")
    jobs: Optional[int] = Field(None, ge=1, description="Worker processes (default: logical cores)")

    @model_validator(mode='after')
    def check_stft(self) -> 'RunConfig':
        if self.hop > self.fft_size:
            raise ValueError(f"hop {self.hop} exceeds fft_size {self.fft_size}")
        return self

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> 'RunConfig':
        """
        Read a recipe and apply overrides

        Args:
            path: Flat JSON recipe, or None for defaults
            overrides: Values that win over the file (None values are ignored)

        Returns:
            Validated RunConfig
        """
        values: Dict[str, Any] = {}
        if path is not None:
            try:
                with open(path) as f:
                    values = json.load(f)
            except OSError as e:
                raise ConfigError(f"{path}: cannot read config ({e})") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
            if not isinstance(values, dict):
                raise ConfigError(f"{path}: config must be a JSON object")
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            where = path if path is not None else 'command line'
            raise ConfigError(f"{where}: {e}") from e

    def stft_config(self) -> StftConfig:
        return StftConfig(fft_size=self.fft_size, hop=self.hop, sample_rate=self.sample_rate)

    def network_config(self) -> ModelConfig:
        values = {k: getattr(self, k) for k in _MODEL_FIELDS}
        return ModelConfig(feature_dim=self.fft_size // 2 + 1, **values)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{k: getattr(self, k) for k in _TRAIN_FIELDS})

    def enhance_options(self) -> EnhanceOptions:
        return EnhanceOptions(**{k: getattr(self, k) for k in _ENHANCE_FIELDS})

    @classmethod
    def flag_spec(cls) -> Dict[str, Dict[str, Any]]:
        """
        argparse keyword arguments per field

        Flags default to None so only values given on the command line
        override the recipe; the help text carries the real default.
        """
        spec = {}
        for name, info in cls.model_fields.items():
            annotation = info.annotation
            args = typing.get_args(annotation)
            if typing.get_origin(annotation) is Union:
                annotation = next(a for a in args if a is not type(None))
                args = typing.get_args(annotation)
            kwargs: Dict[str, Any] = {'default': None,
                                      'help': f"{info.description} (default: {info.default})"}
            if typing.get_origin(annotation) is Literal:
                kwargs['choices'] = list(args)
            elif annotation is bool:
                kwargs['type'] = _parse_bool
                kwargs['metavar'] = '{true,false}'
            else:
                kwargs['type'] = annotation
            spec[name] = kwargs
        return spec


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"Not a boolean: {text!r}")
