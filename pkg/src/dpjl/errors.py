"""Exception and warning types shared across the library."""


class DpjlError(Exception):
    """Base class for all library-specific errors."""


class NotPowerOfTwo(DpjlError, ValueError):
    """Hadamard transform requested on a dimension that is not a power of two."""


class InvalidScale(DpjlError, ValueError):
    """Noise scale outside its valid range (e.g. b <= 0, or sigma below the calibration floor)."""


class InvalidAccuracy(DpjlError, ValueError):
    """Accuracy parameters alpha/beta outside the open interval (0, 1/2)."""


class InvalidPrivacy(DpjlError, ValueError):
    """Privacy parameters epsilon/delta outside their valid range."""


class InvalidBlockStructure(DpjlError, ValueError):
    """Sketch dimension k is not a positive multiple of the sparsity s."""


class DimMismatch(DpjlError, ValueError):
    """Vector length or coordinate index incompatible with a transform."""


class GaussianNeedsDelta(DpjlError, ValueError):
    """Gaussian mechanism requested with delta = 0."""


class SchemeMismatch(DpjlError, ValueError):
    """Noise specification incompatible with the requested estimator scheme."""


class IncompatibleSketches(DpjlError, ValueError):
    """Two private sketches cannot be combined; the message names the mismatched field."""


class TooManyConfigs(DpjlError, ValueError):
    """Exhaustive enumeration would exceed the configured feasibility guard."""


class PrivacyRegimeWarning(UserWarning):
    """Calibration used outside the regime of its standard analysis (e.g. Gaussian with epsilon >= 1)."""
