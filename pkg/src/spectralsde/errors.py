"""Exception types shared across the package."""


class SpectralSDEError(Exception):
    """Base class for every error raised by this package."""


class NonMonotoneSpectrum(SpectralSDEError):
    """Operator eigenvalues are not finite, positive and strictly increasing."""


class NegativeCovariance(SpectralSDEError):
    """A covariance eigenvalue is negative."""


class NegativeExponent(SpectralSDEError):
    """A fractional-power exponent r < 0 was requested."""


class TruncationTooLarge(SpectralSDEError):
    """A requested truncation exceeds the number of stored modes."""


class ZeroSteps(SpectralSDEError):
    """A level grid was requested with zero time steps."""


class EmptyLevels(SpectralSDEError):
    """No noise levels were given."""


class IndexOutOfRange(SpectralSDEError):
    """A grid or table index lies outside its valid range."""


class ReversedWindow(SpectralSDEError):
    """A propagator window starts past its end."""


class GridMismatch(SpectralSDEError):
    """Level grids and merged grid do not describe the same discretisation."""


class DimensionMismatch(SpectralSDEError):
    """Solver inputs disagree on mode, level or step counts."""


class NonFiniteState(SpectralSDEError):
    """The integration produced an overflow or NaN.

    ``eta`` is the merged step index at which the bad state was detected.
    """

    def __init__(self, eta, message=None):
        self.eta = int(eta)
        super().__init__(message or f"non-finite state at merged step {eta}")


class NonUniformInput(SpectralSDEError):
    """The uniform-step solver received non-uniform level grids."""


class StateDependentDiffusion(SpectralSDEError):
    """An exact computation was requested for a state-dependent operator."""


class AllPathsFailed(SpectralSDEError):
    """Every Monte Carlo path aborted before completion."""


class ParseError(SpectralSDEError):
    """Configuration text is not syntactically valid."""


class ValidationError(SpectralSDEError):
    """Configuration parsed but failed validation.

    ``key`` names the offending configuration entry; the message starts with
    that key so diagnostics stay grep-able.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key} {message}")
