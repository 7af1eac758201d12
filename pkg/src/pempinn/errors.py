"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes (config 2, numerical 3, I/O 4),
so new error types should subclass one of the groups below.
"""


class PempinnError(Exception):
    """Base class for package errors."""


class ConfigError(PempinnError):
    """Invalid configuration or parameter value; names the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class NumericalError(PempinnError):
    """Base for failures of solvers, integrators, and training."""


class SolverError(NumericalError):
    """Scalar root solve failed (no bracket or no convergence)."""


class ChemistryError(NumericalError):
    """Radical steady state has no physically admissible solution."""

    def __init__(self, coefficients, message):
        self.coefficients = coefficients
        super().__init__(f"{message} (quadratic coefficients {coefficients})")


class SimulationError(NumericalError):
    """Trajectory integration aborted (e.g. membrane thickness reached zero)."""


class TrainingError(NumericalError):
    """Training aborted, typically on a non-finite loss."""


class DatasetFormatError(PempinnError):
    """Persisted dataset file is malformed."""
