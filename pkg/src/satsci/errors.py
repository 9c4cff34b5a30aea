"""Exception hierarchy shared by the library, the service and the CLI."""


class SciError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(SciError, ValueError):
    """Bad input: out-of-range parameter, wrong shape, malformed file."""

    exit_code = 2


class DimensionError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class BudgetError(SciError):
    """A resource limit (e.g. codebook enumeration budget) would be exceeded."""

    exit_code = 3


class DenoiserError(SciError):
    """An external denoiser failed, timed out or broke its shape contract."""

    exit_code = 4
