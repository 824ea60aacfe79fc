"""Exception types shared across the package."""


class DuffingError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(DuffingError, ValueError):
    """Fock-space dimension is too small to define the requested object."""


class TruncationError(DuffingError, ValueError):
    """Requested operator would be badly truncated at the given dimension."""

    def __init__(self, message: str, recommended_dim: int):
        super().__init__(f"{message} (recommended dim >= {recommended_dim})")
        self.recommended_dim = recommended_dim


class InvalidPairError(DuffingError, ValueError):
    """Bogoliubov pair violates |v|^2 - |u|^2 = 1 or the real-v gauge."""


class UnsupportedBranchError(DuffingError, ValueError):
    """Operation is undefined on the requested attractor branch."""


class ConvergenceError(DuffingError, RuntimeError):
    """Numerical solve failed to reach the requested residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class InvalidInputError(DuffingError, ValueError):
    """Inputs are mutually inconsistent (e.g. alpha/pair not a steady solution)."""


class DegenerateLimitError(DuffingError, ValueError):
    """Parameter combination sits on a degenerate limit (e.g. kappa=0 with dephasing)."""


class DegeneracyError(DuffingError, ValueError):
    """Unperturbed levels too close for non-degenerate perturbation theory."""

    def __init__(self, message: str, level_pair: tuple = ()):
        super().__init__(message)
        self.level_pair = level_pair


class NonUniqueSteadyStateError(DuffingError, RuntimeError):
    """Liouvillian kernel is (numerically) more than one-dimensional."""


class StiffnessError(DuffingError, RuntimeError):
    """Time integration failed; try a smaller dimension or the expm mode."""


class ReducibleRatesError(DuffingError, ValueError):
    """Rate matrix does not connect all retained levels."""


class MissingOrderError(DuffingError, ValueError):
    """Requested perturbation order or level was not computed."""


class UndefinedExtractionError(DuffingError, ValueError):
    """Occupation extraction undefined (distribution not decreasing)."""


class ConfigError(DuffingError, ValueError):
    """Invalid scenario configuration."""
