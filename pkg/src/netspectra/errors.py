"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures with 3 and stability rejections with 4.
"""


class NetspectraError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(NetspectraError):
    """An input violates a documented precondition or invariant."""


class ConfigError(NetspectraError):
    """An experiment configuration is malformed or inconsistent."""


class NumericalError(NetspectraError):
    """A numerical operation failed (singular matrix, bad estimate, overflow)."""


class FrequencyRejectedError(NumericalError):
    """The requested evaluation frequency is unusable.

    Raised when the nodal transfer function vanishes at the requested
    frequency (or, for the skew-part method, when Im{1/h} vanishes).
    The remedy is always the same: pick a different frequency inside the
    excitation band.
    """


class StabilityError(NetspectraError):
    """The assembled network state matrix is not Hurwitz."""
