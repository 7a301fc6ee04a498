"""Exception types shared across the package."""


class CanRevealError(Exception):
    """Base class for all canreveal errors."""


class ParseError(CanRevealError):
    """A log or document line could not be parsed."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class FrameError(CanRevealError):
    """A CAN frame violates a structural constraint (id range, dlc, payload)."""


class DecodeError(CanRevealError):
    """A channel window does not fit the payload it is decoded from."""


class CoverageError(CanRevealError):
    """A resampling grid is not spanned by the series being resampled."""


class ZeroVarianceError(CanRevealError):
    """Correlation is undefined because one input has no variance."""


class ConfigError(CanRevealError):
    """Invalid configuration value or combination."""


class ScenarioError(CanRevealError):
    """A simulation scenario is infeasible or malformed."""


class ProfileError(CanRevealError):
    """A calibration profile document failed to load or validate."""


class DomainError(CanRevealError):
    """Arguments refer to mismatched or unknown entities (ids, channels)."""
