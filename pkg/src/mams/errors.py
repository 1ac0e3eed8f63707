"""Exception types shared across the package."""


class MamsError(Exception):
    """Base class for package errors."""


class ConfigurationError(MamsError):
    """Invalid model, kernel, or experiment configuration."""


class DivergenceError(MamsError):
    """Non-finite or exploding energy terms inside a trajectory."""


class TuningFailureError(MamsError):
    """Adaptation could not reach a usable operating point."""


class DegenerateSeriesError(MamsError):
    """A chain series has no usable variance for autocorrelation estimates."""
