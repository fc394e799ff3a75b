"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration field is out of range or inconsistent.

    The message always names the offending field.
    """


class DataFormatError(ValueError):
    """A measurement or model file failed validation.

    The message carries row/column coordinates where applicable.
    """


class DegeneratePowerError(ValueError):
    """A sample window has zero power; its RSS in dB is undefined.

    Raised instead of returning -inf, which would silently poison
    anything trained on the resulting features.
    """


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN/inf loss or gradient."""
