import numpy as np


class AnalyticEDMDError(Exception):
    """Base class of every error raised by the library.

    Attributes
    ----------
    exit_code : int
        process exit code used by the command line when this error aborts a command
    """
    exit_code = 1


class InvalidArgumentError(AnalyticEDMDError, ValueError):
    """An argument is outside its admissible range (negative degree, empty box, ...)."""


class DimensionMismatchError(AnalyticEDMDError, ValueError):
    """Arrays that must agree in length or state dimension do not."""


class ConfigError(AnalyticEDMDError, ValueError):
    """Run configuration is invalid or references missing files."""


class ParseError(ConfigError):
    """A snapshot, matrix or metadata file could not be parsed."""


class SimulationBlowUpError(AnalyticEDMDError, ArithmeticError):
    """Trajectory integration produced a non-finite state."""
    exit_code = 2

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


class DomainViolationError(AnalyticEDMDError, ValueError):
    """Points fall outside the domain where the kernel is defined.

    Parameters
    ----------
    message : str
        human readable description
    indices : list[int]
        offending sample indices
    role : str
        which points were checked ("sample", "image", "point")
    max_abs : float
        largest translated coordinate magnitude seen, so that users can pick a rescaling factor
    """
    exit_code = 3

    def __init__(self, message: str, indices: list[int], role: str = "point", max_abs: float = np.nan):
        super().__init__(message)
        self.indices = indices
        self.role = role
        self.max_abs = max_abs


class SingularGramError(AnalyticEDMDError, np.linalg.LinAlgError):
    """The Gram matrix could not be inverted under the exact policy."""

    def __init__(self, message: str, condition_estimate: float = np.inf):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class RankDeficiencyError(AnalyticEDMDError, np.linalg.LinAlgError):
    """The basis Gram matrix XᵀG⁻¹X of a non-orthonormal fit is singular."""
