"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else raised inside a stage -> 3.
"""


class NidskitError(Exception):
    """Base class for all package errors."""


class ConfigError(NidskitError):
    """Invalid configuration or unusable argument combination."""


class DataError(NidskitError):
    """Input data is missing, malformed, or unusable."""


class DivergenceError(NidskitError):
    """Training produced a non-finite loss."""


class StageError(NidskitError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
