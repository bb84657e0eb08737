from .validators import Validators
from .errors import AdsepError, ShapeError, DataError, ConfigError, NumericError

__all__ = ['Validators', 'AdsepError', 'ShapeError', 'DataError', 'ConfigError', 'NumericError']
