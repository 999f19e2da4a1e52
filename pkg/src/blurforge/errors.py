class InputError(ValueError):
    """Malformed or inconsistent input data."""


class ConfigurationError(ValueError):
    """Invalid operator or pipeline configuration."""


class CalibrationDegenerateError(ValueError):
    """The exposure stack does not constrain the response curve."""


class InvalidCurveError(ValueError):
    """A response curve violates the strict monotonicity requirement."""


class UnlabeledError(ValueError):
    """No valid depth pixels to derive a proximity label from."""


class DegenerateDepthError(ValueError):
    """Depth sequence has no positive value to normalize by."""
