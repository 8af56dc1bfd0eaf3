"""Exception types shared across the package.

The CLI maps these to exit codes: NumericalError -> 3, CertificateError -> 4.
"""


class NumericalError(RuntimeError):
    """A computation failed to reach its accuracy target."""


class BracketError(NumericalError):
    """A root scan did not isolate the requested number of roots."""


class InsufficientEnumerationError(NumericalError):
    """An enumeration bound was too small to certify completeness."""


class ConvergenceError(NumericalError):
    """Refinement of a discretization did not settle within tolerance."""


class DegenerateDenominatorError(NumericalError):
    """A closed-form expression has a vanishing denominator."""


class CertificateError(RuntimeError):
    """A certificate was computed but one of its checks failed."""


class BesselOverflowError(OverflowError):
    """Y_n(x) or its derivative is not representable in double precision."""
