"""
Error types shared across the pipeline
"""


class AdsepError(Exception):
    """Base class for all pipeline errors"""


class ShapeError(AdsepError, ValueError):
    """Operand shapes do not conform to an operation"""


class DataError(AdsepError, ValueError):
    """Malformed or missing data (manifests, WAV files, channels, disk paths)"""


class ConfigError(AdsepError, ValueError):
    """Invalid or unknown configuration"""


class NumericError(AdsepError, ArithmeticError):
    """Non-finite values where finite ones are required"""
