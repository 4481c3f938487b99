"""Packet scheduling and self-localization analytics for underwater
acoustic anchor networks."""

__version__ = "0.1.0"

from .config import NetworkConfig, PhyConfig, build, load
from .errors import (ConfigError, DomainError, ModelViolationError, NumericError,
                     SingularFimError, UwlocError)

__all__ = [
    "NetworkConfig", "PhyConfig", "build", "load",
    "UwlocError", "ConfigError", "DomainError", "NumericError",
    "ModelViolationError", "SingularFimError", "__version__",
]
