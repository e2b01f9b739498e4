"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (2, 3, 4).
"""


class VQIdentError(Exception):
    pass


class ConfigError(VQIdentError, ValueError):
    """Malformed or inconsistent configuration."""


class InfeasibleError(VQIdentError):
    """No object satisfies the requested constraint."""


class CapExceededError(VQIdentError):
    """A configured size cap (enumeration, memory, brute force) was hit."""


class SolverError(VQIdentError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
