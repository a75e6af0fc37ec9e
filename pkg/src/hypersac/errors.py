"""Exception types raised across the package."""


class HyperSacError(Exception):
    """Base class for every error raised by hypersac."""


class DimensionError(HyperSacError, ValueError):
    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)


class NonFiniteError(HyperSacError, FloatingPointError):
    """A primitive produced NaN or inf. ``primitive`` names the offender."""

    def __init__(self, primitive):
        self.primitive = primitive
        super().__init__(f"non-finite value produced by primitive '{primitive}'")


class RewardBaselineError(HyperSacError, ValueError):
    def __init__(self, loss, baseline, min_gap):
        self.loss = loss
        self.baseline = baseline
        super().__init__(
            f"loss {loss!r} is not above baseline {baseline!r} + {min_gap!r}; "
            "lower the reward baseline below the smallest attainable loss"
        )


class InsufficientSamplesError(HyperSacError, ValueError):
    def __init__(self, available, requested):
        self.available = available
        self.requested = requested
        super().__init__(f"insufficient samples: buffer holds {available}, requested {requested}")


class EmptyBatchError(HyperSacError, ValueError):
    pass


class DatasetError(HyperSacError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(HyperSacError, ValueError):
    pass
