"""
Exception hierarchy for hosadecon
"""

from typing import Optional


class HosaDeconError(Exception):
    """Base class for all hosadecon errors"""


class ConfigError(HosaDeconError):
    """Invalid configuration or command-line usage"""


class TraceFormatError(HosaDeconError):
    """A series file or its sidecar could not be parsed"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DegenerateInputError(HosaDeconError):
    """Input carries no usable energy (all-zero trace, zero bispectrum)"""


class EstimationError(HosaDeconError):
    """A numeric precondition of an estimator cannot be met"""


class StageError(HosaDeconError):
    """A pipeline stage failed as a whole"""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
