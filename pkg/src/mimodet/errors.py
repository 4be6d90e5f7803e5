"""Exception types shared across the engine."""


class MimodetError(Exception):
    """Base class for all engine errors."""


class ShapeError(MimodetError, ValueError):
    """Array dimensions do not match the declared layer/operator shapes."""


class InvalidOrderError(MimodetError, ValueError):
    """Modulation order is not a usable square QAM order."""


class LabelError(MimodetError, ValueError):
    """Message label outside {1..M}."""


class UnsupportedConstellationError(MimodetError, ValueError):
    """Detector requires a separable (square QAM) constellation."""


class BudgetExceededError(MimodetError, RuntimeError):
    """Exhaustive search would exceed the configured hypothesis budget."""


class ConfigError(MimodetError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericError(MimodetError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class BundleError(MimodetError, ValueError):
    """Base class for weight-bundle problems."""


class BundleFormatError(BundleError):
    """Bad magic, unsupported version, or malformed framing."""


class TruncatedBundleError(BundleFormatError):
    """Stream ended early; ``offset`` is the byte position of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CorruptWeightsError(BundleError):
    """NaN/Inf entries inside a tensor payload."""


class IncompleteBundleError(BundleError):
    """Required tensor missing or shapes conflict with the declared config."""


class ConventionMismatchError(BundleError):
    """Bundle was trained under a different GRU/activation convention."""


class NormalizationError(BundleError):
    """Constellation points violate the unit-average-power contract."""
