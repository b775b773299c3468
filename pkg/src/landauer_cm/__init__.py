"""Collision-model simulator for heat, entropy and Landauer bounds of small open quantum systems."""

__version__ = "0.1.0"

from .config import PRESETS, ScenarioConfig, parse_config  # noqa: E402
from .errors import (ArgumentError, ConfigError, DomainError, IntegrationError,  # noqa: E402
                     TruncationError, TruncationWarning)
from .hilbert import DensityMatrix, Operator  # noqa: E402
from .lindblad import GeneratorSpec, Trajectory, evolve  # noqa: E402
from .models import BathSpec, CouplingSpec, FockSpace, InteractionSpec  # noqa: E402

__all__ = [
    "__version__", "PRESETS", "ScenarioConfig", "parse_config", "ArgumentError",
    "ConfigError", "DomainError", "IntegrationError", "TruncationError",
    "TruncationWarning", "DensityMatrix", "Operator", "GeneratorSpec", "Trajectory",
    "evolve", "BathSpec", "CouplingSpec", "FockSpace", "InteractionSpec",
]
