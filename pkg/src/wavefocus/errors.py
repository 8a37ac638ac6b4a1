"""Exception types and warnings shared across the package."""

from __future__ import annotations


class WavefocusError(Exception):
    """Base class for all package errors."""


class ConfigError(WavefocusError):
    """Invalid configuration. Collects every offending key."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InvalidInputError(WavefocusError):
    """Arguments violate an operation's precondition."""


class EmptyRegionError(InvalidInputError):
    """A region descriptor selected no grid points."""


class InvalidCoefficientError(InvalidInputError):
    """Coefficient field violates positivity or boundedness requirements."""


class ShapeError(InvalidInputError):
    """Vector length inconsistent with a linear map's declared shape."""


class CflError(WavefocusError):
    """Time step violates the stability bound of an explicit scheme."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(f"dt={dt:g} violates stability bound dt<={dt_max:g}")


class FeasibilityError(WavefocusError):
    """A travel-time feasibility condition fails for the requested windows."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class RegionOverlapError(WavefocusError):
    """Target and suppression regions overlap; caller must shrink one."""


class DegenerateXiError(WavefocusError):
    """Constructed seed datum has (numerically) zero norm."""


class NotPositiveDefiniteError(WavefocusError):
    """Negative curvature in a Krylov solve: the operator pair is not a
    genuine adjoint pair (or the system is not SPD)."""


class NumericalBreakdownError(WavefocusError):
    """A quantity that is positive in exact arithmetic came out nonpositive."""


class FormatError(WavefocusError):
    """On-disk artifact is malformed (bad magic, dims, or truncated)."""


class MaxIterationsWarning(UserWarning):
    """Krylov solve hit its iteration cap; the last iterate is returned."""
