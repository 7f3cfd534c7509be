"""Exception hierarchy for configuration and numerical failures."""

from __future__ import annotations


class SgTrafficError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(SgTrafficError):
    """Raised when an experiment configuration fails to parse or validate.

    ``diagnostics`` holds every problem found, each prefixed with its line number.
    """

    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))

    def __reduce__(self) -> tuple[type, tuple[list[str]]]:
        return type(self), (self.diagnostics,)


class BasisError(SgTrafficError):
    """Raised for unsupported basis families, orders or quadrature resolutions."""


class NumericalError(SgTrafficError):
    """Base class for failures detected while a solver runs."""


class SingularGalerkinMatrixError(NumericalError):
    """Raised when P(u) is singular or too ill-conditioned to invert."""


class HeadwayError(NumericalError):
    """Raised when a reconstructed headway is nonpositive at a quadrature node."""


class VehicleOrderingError(NumericalError):
    """Raised when the mean positions of two consecutive vehicles cross."""


class CFLViolationError(NumericalError):
    """Raised when a requested time step violates the CFL bound."""


class EquilibriumError(NumericalError):
    """Raised when the kinetic equilibrium cannot be built for a density."""


class DensityBoundsError(NumericalError):
    """Raised when a reconstructed density leaves its admissible range."""


class HyperbolicityError(NumericalError):
    """Raised when a basis does not certify hyperbolicity of the Galerkin ARZ system."""


class GridMismatchError(NumericalError):
    """Raised when two results to be compared live on different grids or times."""


class SampleFailureError(NumericalError):
    """Raised when a Monte Carlo sample fails; ``xi`` is the offending sample value."""

    def __init__(self, xi: float, cause: Exception) -> None:
        self.xi = xi
        self.cause = cause
        super().__init__(f"sample xi={xi!r} failed: {cause}")

    def __reduce__(self) -> tuple[type, tuple[float, Exception]]:
        return type(self), (self.xi, self.cause)
