"""Exception hierarchy.

Value-type errors subclass ValueError so pydantic validators can raise them
directly. Run aborts subclass SolverAbort, which the CLI maps to exit code 2
and the sweep layer records per cell.
"""

from typing import Optional


class RigidLidError(Exception):
    """Base class for every error raised by the package."""


class GridMismatchError(RigidLidError, ValueError):
    """Array shape does not match the grid it is paired with."""


class MultiplierError(RigidLidError, ValueError):
    """A Fourier symbol is not finite on some grid wavenumber."""


class InadmissibleParametersError(RigidLidError, ValueError):
    """abcd coefficients violate b, d >= 0 and a, c <= 0."""


class DegeneratePhaseError(RigidLidError, ValueError):
    """The dispersion phase reduces to g(y) = y."""


class ResolutionError(RigidLidError, ValueError):
    """The grid cannot resolve the requested evolution."""


class FitError(RigidLidError, ValueError):
    """Rate fit cannot be performed on the given data."""


class ConfigError(RigidLidError, ValueError):
    """Invalid configuration file, override or suite tag."""


class SolverAbort(RigidLidError, RuntimeError):
    """A time integration stopped before reaching its final time."""

    def __init__(self, message: str, time: Optional[float] = None):
        super().__init__(message)
        self.time = time


class DepthFloorViolation(SolverAbort):
    """Depth 1 + eps*zeta dropped below the configured floor h0."""

    def __init__(self, min_depth: float, h0: float, time: Optional[float] = None):
        super().__init__(
            f"depth floor violated: min(1 + eps*zeta) = {min_depth:.6g} < h0 = {h0:.6g}",
            time,
        )
        self.min_depth = min_depth
        self.h0 = h0


class BoundaryContamination(SolverAbort):
    """Too much of the solution reached the edge of the periodic box."""

    def __init__(self, fraction: float, limit: float, time: Optional[float] = None):
        super().__init__(
            f"boundary mass fraction {fraction:.3e} exceeds {limit:.1e}", time
        )
        self.fraction = fraction
        self.limit = limit


class ConvergenceError(SolverAbort):
    """Elliptic solve did not reach the requested tolerance."""

    def __init__(self, residual: float, tol: float, iterations: int):
        super().__init__(
            f"elliptic solve stalled after {iterations} iterations: "
            f"relative residual {residual:.3e} > tol {tol:.1e}"
        )
        self.residual = residual
        self.tol = tol
        self.iterations = iterations
