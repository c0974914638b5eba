"""Single-level blood-cell detector with a small numpy autodiff core."""

from .config import ScalingCoefficients, TEYOLOFConfig, compound_scale
from .errors import ConfigError, DataError, TEYOLOFError, TrainingError, UsageError
from .model import TEYOLOF, ModelOutput, fuse_scores

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "ModelOutput", "ScalingCoefficients", "TEYOLOF", "TEYOLOFConfig",
    "TEYOLOFError", "TrainingError", "UsageError", "compound_scale", "fuse_scores",
]
