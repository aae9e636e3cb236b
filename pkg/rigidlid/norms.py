"""
Measurement functionals: L^r in space, mixed L^q_t L^r_x over snapshots,
H^s and X^k_mu norms, and the Gaussian-weighted local energy.

Physical fields are real arrays of shape ``grid.shape`` or
``(components, *grid.shape)``; vector fields are measured through their
pointwise Euclidean magnitude.
"""

import logging
import math
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, field_validator, model_validator
from scipy.integrate import trapezoid

from .errors import GridMismatchError
from .models import State
from .models.base import ArrayModel, BaseModel
from .spectra import BOUNDARY_WEIGHT_LIMIT, Grid, SpectralField, divergence, gaussian_weight

logger = logging.getLogger(__name__)

MIN_SNAPSHOTS_PER_UNIT = 16
DEFAULT_X0_SPACING = 0.5

Components = Literal["all", "zeta", "velocity", "gradient", "rotational"]


# ---------------------------------------------------------------------------
# spatial norms


def refined_max(values: np.ndarray) -> float:
    """
    Maximum of a nonnegative periodic array, refined by a parabola per axis.

    The three-point parabola through the argmax and its periodic neighbours
    is fitted separately along each axis and the vertex corrections added.
    """
    values = np.asarray(values, dtype=float)
    idx = np.unravel_index(int(np.argmax(values)), values.shape)
    peak = float(values[idx])
    for axis, n in enumerate(values.shape):
        if n < 3:
            continue
        lo = list(idx)
        hi = list(idx)
        lo[axis] = (idx[axis] - 1) % n
        hi[axis] = (idx[axis] + 1) % n
        ym, yp = float(values[tuple(lo)]), float(values[tuple(hi)])
        curvature = 0.5 * (ym + yp) - peak
        if curvature < 0.0:
            slope = 0.5 * (yp - ym)
            peak -= slope * slope / (4.0 * curvature)
    return peak


def magnitude(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Pointwise |f| for scalar fields, Euclidean magnitude for vector fields."""
    field = np.asarray(field, dtype=float)
    if field.shape == grid.shape:
        return np.abs(field)
    if field.shape[1:] != grid.shape:
        raise GridMismatchError(f"field of shape {field.shape} does not live on grid {grid.shape}")
    return np.sqrt(np.sum(field**2, axis=0))


def spatial_norm(field: Union[np.ndarray, SpectralField], grid: Optional[Grid] = None, r: float = 2.0) -> float:
    """
    ||f||_{L^r} by grid quadrature, or the refined grid max for r = inf.

    Args:
        field: physical samples, or a SpectralField (its grid is used)
        grid: grid of the samples; optional for SpectralField input
        r: exponent in [1, inf]

    Returns:
        the norm, nonnegative
    """
    if isinstance(field, SpectralField):
        grid = field.grid
        field = field.to_physical()
    if grid is None:
        raise ValueError("physical samples need their grid")
    if not r >= 1:
        raise ValueError(f"L^r norms need r >= 1, got {r}")
    mag = magnitude(field, grid)
    if math.isinf(r):
        return refined_max(mag)
    return float((np.sum(mag**r) * grid.cell_volume) ** (1.0 / r))


def sobolev_norm(sf: SpectralField, s: float) -> float:
    """(dx^n sum (1 + |xi|^2)^s |f_hat|^2)^(1/2), summed over components."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    weight = (1.0 + sf.grid.wavenumber_squared()) ** s
    power = np.abs(sf.coefficients) ** 2
    if sf.is_vector:
        power = power.sum(axis=0)
    return float(np.sqrt(np.sum(weight * power) * sf.grid.cell_volume))


def x_k_mu_norm(state: State, k: float, mu: float) -> float:
    """||zeta||_{H^k} + ||V||_{H^k} + sqrt(mu) ||div V||_{H^k}."""
    grid = state.grid
    v = state.velocity.coefficients
    div = divergence(v if state.velocity.is_vector else v[np.newaxis], grid)
    div_field = SpectralField(grid=grid, coefficients=div)
    return sobolev_norm(state.zeta, k) + sobolev_norm(state.velocity, k) + math.sqrt(mu) * sobolev_norm(div_field, k)


# ---------------------------------------------------------------------------
# space-time norms


class FieldSeries(ArrayModel):
    """Physical snapshots ``values[i]`` at ``times[i]``, component axis second."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "FieldSeries":
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == self.grid.dim + 1:
            values = values[:, np.newaxis]
        if values.shape[0] != times.shape[0] or values.shape[2:] != self.grid.shape:
            raise GridMismatchError(f"series of shape {values.shape} does not match {times.shape[0]} times on {self.grid.shape}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        return self

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0

    def __sub__(self, other: "FieldSeries") -> "FieldSeries":
        if other.grid != self.grid or not np.array_equal(other.times, self.times):
            raise GridMismatchError("series differ in grid or snapshot times")
        return FieldSeries(grid=self.grid, times=self.times, values=self.values - other.values)

    def scaled(self, factor: float) -> "FieldSeries":
        return FieldSeries(grid=self.grid, times=self.times, values=factor * self.values)

    def window(self, t_end: float) -> "FieldSeries":
        keep = self.times <= t_end + 1e-12
        return FieldSeries(grid=self.grid, times=self.times[keep], values=self.values[keep])


def _as_series(source, components: Components) -> FieldSeries:
    if isinstance(source, FieldSeries):
        return source
    return source.field_series(components)


class MixedNormSpec(BaseModel):
    """
    Exponents of an L^q_t L^r_x norm.

    ``constraint`` = (k, rhs) encodes the admissibility relation
    1/q + k/r = rhs of the estimate the pair is measured for.
    """

    q: float = Field(..., description="time exponent, >= 2 or inf")
    r: float = Field(..., description="space exponent, >= 2 or inf")
    tag: str = ""
    constraint: Optional[Tuple[float, float]] = None

    @field_validator("q", "r")
    @classmethod
    def _at_least_two(cls, v: float) -> float:
        if not v >= 2:
            raise ValueError(f"mixed-norm exponents must be >= 2 or inf, got {v}")
        return float(v)

    @property
    def constraint_residual(self) -> Optional[float]:
        if self.constraint is None:
            return None
        k, rhs = self.constraint
        return 1.0 / self.q + k / self.r - rhs

    @property
    def label(self) -> str:
        return f"({_fmt(self.q)},{_fmt(self.r)})"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:g}"


class NormSeries(BaseModel):
    """Per-snapshot spatial norms and the resulting mixed norm."""

    times: List[float]
    spatial: List[float]
    quadrature: Literal["trapezoid", "sup"]
    q: float
    value: float = Field(..., ge=0.0)

    def restricted(self, t_end: float) -> "NormSeries":
        keep = [i for i, t in enumerate(self.times) if t <= t_end + 1e-12]
        times = [self.times[i] for i in keep]
        spatial = [self.spatial[i] for i in keep]
        return NormSeries(
            times=times,
            spatial=spatial,
            quadrature=self.quadrature,
            q=self.q,
            value=_time_norm(np.array(times), np.array(spatial), self.q),
        )


def _time_norm(times: np.ndarray, spatial: np.ndarray, q: float) -> float:
    if spatial.size == 0:
        return 0.0
    if math.isinf(q):
        return float(np.max(spatial))
    if spatial.size == 1:
        return 0.0
    return float(trapezoid(spatial**q, times) ** (1.0 / q))


def mixed_norm_series(source, components: Components = "all", spec: Optional[MixedNormSpec] = None) -> NormSeries:
    """Spatial L^r norm of every snapshot and its L^q combination in time."""
    spec = spec or MixedNormSpec(q=2.0, r=2.0)
    series = _as_series(source, components)
    times = series.times
    if series.duration > 0:
        density = (len(times) - 1) / series.duration
        if density < MIN_SNAPSHOTS_PER_UNIT:
            logger.warning(
                "only %.1f snapshots per unit time (< %d); time quadrature may be inaccurate",
                density,
                MIN_SNAPSHOTS_PER_UNIT,
            )
    spatial = np.array([spatial_norm(_squeeze(v), series.grid, spec.r) for v in series.values])
    return NormSeries(
        times=times.tolist(),
        spatial=spatial.tolist(),
        quadrature="sup" if math.isinf(spec.q) else "trapezoid",
        q=spec.q,
        value=_time_norm(times, spatial, spec.q),
    )


def mixed_norm(source, components: Components = "all", spec: Optional[MixedNormSpec] = None) -> float:
    """
    ||f||_{L^q_t L^r_x} over the stored snapshots.

    Args:
        source: FieldSeries, or a Trajectory (``components`` selects the part)
        components: all, zeta, velocity, gradient or rotational
        spec: exponents; defaults to q = r = 2

    Returns:
        composite trapezoid of ||f(t)||_r^q to the power 1/q, or the max for q = inf
    """
    return mixed_norm_series(source, components, spec).value


def _squeeze(v: np.ndarray) -> np.ndarray:
    return v[0] if v.shape[0] == 1 else v


def _centre_kernel(grid: Grid, spacing: float, rate: float) -> np.ndarray:
    """
    exp(-rate (x_c - x)^2) between strided centre nodes x_c and all nodes x of one axis.

    Centres are every stride-th node counted from x = 0, so the origin is one of them.
    """
    n, dx = grid.modes_per_axis, grid.dx
    x = -0.5 * grid.length + dx * np.arange(n)
    stride = max(1, int(round(spacing / dx)))
    centres = x[np.arange((n // 2) % stride, n, stride)]
    return np.exp(-rate * (centres[:, np.newaxis] - x[np.newaxis, :]) ** 2)


def morawetz_norm(
    source,
    components: Components = "all",
    x0_grid: Optional[Sequence] = None,
    spacing: float = DEFAULT_X0_SPACING,
    subtract_mean: bool = False,
) -> float:
    """
    sup over x0 of ||exp(-|x - x0|^2) f||_{L^2_t L^2_x}.

    Args:
        source: FieldSeries or Trajectory
        components: part of the trajectory to measure
        x0_grid: explicit centres; by default every grid node at the given spacing
        spacing: stride of the default centre grid
        subtract_mean: remove the spatial mean of every component per snapshot

    Returns:
        the largest weighted space-time L^2 norm over the centres
    """
    series = _as_series(source, components)
    grid = series.grid
    values = series.values
    if subtract_mean:
        values = values - values.mean(axis=tuple(range(2, values.ndim)), keepdims=True)
    density = np.sum(values**2, axis=1)
    if len(series.times) < 2:
        return 0.0
    integrated = trapezoid(density, series.times, axis=0)

    if x0_grid is not None:
        best = 0.0
        for x0 in x0_grid:
            weight = gaussian_weight(np.ones(grid.shape), grid, x0)
            best = max(best, float(np.sum(integrated * weight**2) * grid.cell_volume))
        return math.sqrt(best)

    if math.exp(-((0.5 * grid.length) ** 2)) > BOUNDARY_WEIGHT_LIMIT:
        logger.warning("box of length %g is too small for the local-energy weight", grid.length)
    # exp(-2|x - x0|^2) factorises over the axes
    kernel = _centre_kernel(grid, spacing, 2.0)
    smoothed = integrated
    for axis in range(grid.dim):
        smoothed = np.moveaxis(np.tensordot(kernel, smoothed, axes=([1], [axis])), 0, axis)
    return math.sqrt(max(float(np.max(smoothed)) * grid.cell_volume, 0.0))


def space_time_l2(source, components: Components = "all") -> float:
    return mixed_norm(source, components, MixedNormSpec(q=2.0, r=2.0))
