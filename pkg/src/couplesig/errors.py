"""Exception types shared across the package."""


class CouplesigError(Exception):
    """Base class for all package errors."""


class ZeroVariance(CouplesigError):
    """Signal or tap sequence is constant; standardization undefined."""


class InvalidCutoff(CouplesigError):
    """Filter cutoff at or above the Nyquist frequency."""


class SampleRateMismatch(CouplesigError):
    """Two signals that must share a sample rate do not."""


class LengthMismatch(CouplesigError):
    """Two sequences that must have equal length do not."""


class SilentNoise(CouplesigError):
    """Noise clip has zero power; SNR mixing undefined."""


class DegenerateExcitation(CouplesigError):
    """Excitation spectrum is identically zero; deconvolution undefined."""


class TooShort(CouplesigError):
    """Signal too short for the requested spectral estimate."""


class TooLarge(CouplesigError):
    """Instance too large for the brute-force oracle."""


class ShapeMismatch(CouplesigError):
    """Array shapes incompatible."""


class NumericalError(CouplesigError):
    """Base class for numerical failures (CLI exit code 4)."""


class NumericalOverflow(NumericalError):
    """Kernel-domain Sinkhorn over/underflowed; use log-domain stabilization."""


class Divergence(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class NonConvergenceWarning(UserWarning):
    """Iterative solver hit its iteration cap while still moving."""
