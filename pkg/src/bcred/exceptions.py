"""Exception types raised across the package."""


class BCREDError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(BCREDError, ValueError):
    """Array lengths or shapes do not agree."""


class InvalidBlockCountError(BCREDError, ValueError):
    """Requested number of blocks is outside ``[1, n]``."""


class InvalidStepSizeError(BCREDError, ValueError):
    """Step size violates the convergence guard."""


class IncompatibleDenoiserError(BCREDError, ValueError):
    """Denoiser cannot be used with the requested partition or solver."""


class MalformedFileError(BCREDError, ValueError):
    """A file on disk does not follow the expected format."""


class ConfigError(BCREDError, ValueError):
    """Experiment configuration could not be parsed or validated.

    ``key`` names the offending configuration entry when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
