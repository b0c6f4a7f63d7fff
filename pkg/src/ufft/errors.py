"""Exception types shared across the package."""


class UfftError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(UfftError):
    """A matrix required to be positive definite is not."""


class NotPowerOfTwo(UfftError):
    """An FFT-path operation received a length that is not a power of two."""


class SingularSystem(UfftError):
    """The combined posterior precision is numerically singular."""


class NonFiniteMessage(UfftError):
    """A BP message or intermediate matrix contains NaN/Inf."""


class MaxItersExceeded(UfftError):
    """GaBP hit the iteration cap before converging."""


class DegenerateTilt(UfftError):
    """All tilted-distribution weights underflowed or a component fusion is improper."""


class ZeroFrequencyResponse(UfftError):
    """A channel frequency bin is (numerically) zero and cannot be inverted."""


class StateSpaceTooLarge(UfftError):
    """Viterbi trellis state space exceeds the supported tap count."""


class BlockTooLarge(UfftError):
    """Brute-force MAP block length exceeds the exhaustive-search limit."""


class LengthMismatch(UfftError):
    """Two sequences that must have equal length do not."""
