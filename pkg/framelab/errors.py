"""
Exceptions raised by framelab.

Precondition failures derive from ``ValueError`` and numerical failures from
``ArithmeticError`` so callers can catch either family.
"""


class FramelabError(Exception):
    """Base class of every framelab error."""


class InvalidConfig(FramelabError, ValueError):
    """An experiment configuration cannot be parsed or validated."""


class DescriptorError(FramelabError, ValueError):
    """A measure, spectrum or IFS descriptor string is malformed."""


# ---------- measure-core ----------
class NonPositiveMass(FramelabError, ValueError):
    """The quadrature mass of a density is not positive."""


class NegativeDensity(FramelabError, ValueError):
    """A density sample is negative."""


class NotDensityVariant(FramelabError, ValueError):
    """The operation needs a measure with an explicit density."""


# ---------- fourier ----------
class TolTooTight(FramelabError, ArithmeticError):
    """The requested tolerance needs a grid or product depth beyond the configured caps."""


# ---------- spectra ----------
class JitterTooLarge(FramelabError, ValueError):
    """max_jitter must lie in [0, alpha/2)."""


class WindowTooSmall(FramelabError, ValueError):
    """A sliding window does not fit inside the spectrum window."""


class EmptyCell(FramelabError, ValueError):
    """A selection cell contains no point of the spectrum."""

    def __init__(self, gamma: float, L: float):
        self.gamma = gamma
        self.L = L
        super().__init__(f"Cell {gamma} + [-{L / 2}, {L / 2}) contains no point")


class NoPositiveEpsilon(FramelabError, ArithmeticError):
    """No positive epsilon satisfies the perturbation inequalities."""


# ---------- frame-analysis ----------
class SizeCap(FramelabError, ValueError):
    """The frame matrix would exceed the configured size cap."""


class EigenNoConvergence(FramelabError, ArithmeticError):
    """An eigenvalue iteration did not reach its tolerance."""


class NotUnbounded(FramelabError, ValueError):
    """The upper-bound diagnostic needs a density that is unbounded above."""


# ---------- self-similar ----------
class BadContraction(FramelabError, ValueError):
    """The contraction ratio must lie in (0, 1)."""


class DuplicateDigits(FramelabError, ValueError):
    """The digit set contains repeated values."""


class DepthCap(FramelabError, ValueError):
    """Enumerating digit words would exceed the configured word cap."""


class UnsupportedLambda(FramelabError, ValueError):
    """The Bernoulli density estimate needs lambda in [1/2, 1)."""
