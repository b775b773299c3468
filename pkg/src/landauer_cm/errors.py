"""Exception types raised across the package."""


class ArgumentError(ValueError):
    """Malformed argument: bad subsystem index, non-Hermitian input, shape mismatch."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class IntegrationError(RuntimeError):
    """A propagated state left the set of valid density matrices."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(ValueError):
    """Invalid scenario configuration."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class TruncationWarning(UserWarning):
    """Population reached the top of a truncated Fock space."""


class TruncationError(RuntimeError):
    """Fock-space truncation warning escalated by ``fock.strict``."""
