"""
Model configuration
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from config.settings import MODEL_DEFAULTS, SINGLE_CHANNEL_LAYERS


class ModelConfig(BaseModel):
    """Architecture hyperparameters of a separation network"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    architecture: Literal['spatiotemporal', 'single_channel'] = 'spatiotemporal'
    num_blocks: int = Field(MODEL_DEFAULTS['num_blocks'], ge=1)
    feature_dim: int = Field(MODEL_DEFAULTS['feature_dim'], ge=1)  # N, equals the bin count F
    embed_dim: int = Field(MODEL_DEFAULTS['embed_dim'], ge=1)  # E
    num_heads: int = Field(MODEL_DEFAULTS['num_heads'], ge=1)  # D
    hidden_size: int = Field(MODEL_DEFAULTS['hidden_size'], ge=1)  # H
    num_sources: Literal[2] = MODEL_DEFAULTS['num_sources']
    topology: Literal['interleaved', 'stacked'] = 'interleaved'
    input_feature: Literal['magnitude', 'magnitude+relational'] = 'magnitude'
    scaled_attention: bool = False
    single_channel_layers: int = Field(SINGLE_CHANNEL_LAYERS, ge=1)

    @property
    def relational(self) -> bool:
        return self.input_feature == 'magnitude+relational'

    @property
    def input_dim(self) -> int:
        """Width of the first layer's input"""
        return 2 * self.feature_dim if self.relational else self.feature_dim

    @property
    def num_bins(self) -> int:
        return self.feature_dim
