"""
Spectral infrastructure on periodic boxes [-L/2, L/2)^n, n = 1 or 2.

Conventions used everywhere in the package:

* Transforms are unitary: ``fftn(..., norm="ortho")`` per axis, so
  ``sum |f|^2 == sum |f_hat|^2`` with no extra factor. Coefficients are stored
  in the standard FFT ordering with wavenumbers xi_k = 2*pi*k/L.
* Symbols of the type grad/Laplacian (Riesz transforms, Biot-Savart,
  Hodge projectors) send the xi = 0 mode to 0.
* The perpendicular gradient is grad_perp = (-d_2, d_1).
* Multi-component fields (velocities) carry the component index on the
  leading axis: shape ``(dim, *grid.shape)``.
* The low-pass profile phi_0 is the C-infinity bump equal to 1 on
  |y| <= 1/2 and 0 on |y| >= 1, phi_0(y) = s(2 - 2|y|) with the smoothstep
  s(t) = f(t) / (f(t) + f(1 - t)), f(t) = exp(-1/t) for t > 0, 0 otherwise.
"""

import logging
from functools import lru_cache
from typing import Callable, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import fft as sfft

from .config import settings
from .errors import GridMismatchError, MultiplierError

logger = logging.getLogger(__name__)

BOUNDARY_WEIGHT_LIMIT = 1e-16


class Grid(BaseModel):
    """Periodic computational box standing in for R^n."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: Literal[1, 2]
    modes_per_axis: int = Field(..., description="N, even, >= 8")
    length_per_axis: float = Field(..., description="L, box is [-L/2, L/2) per axis")

    @field_validator("modes_per_axis")
    @classmethod
    def _even_modes(cls, v: int) -> int:
        if v < 8 or v % 2:
            raise ValueError(f"modes_per_axis must be even and >= 8, got {v}")
        return v

    @field_validator("length_per_axis")
    @classmethod
    def _positive_length(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"length_per_axis must be positive, got {v}")
        return v

    @property
    def n(self) -> int:
        return self.modes_per_axis

    @property
    def length(self) -> float:
        return self.length_per_axis

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.modes_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.modes_per_axis ** self.dim

    @property
    def dx(self) -> float:
        return self.length_per_axis / self.modes_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Full-shape physical coordinate arrays (``ij`` indexing)."""
        return _coordinates(self.dim, self.modes_per_axis, self.length_per_axis)

    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """Full-shape wavenumber arrays xi_i in FFT ordering."""
        return _wavenumbers(self.dim, self.modes_per_axis, self.length_per_axis)

    def mode_indices(self) -> Tuple[np.ndarray, ...]:
        """Full-shape integer mode indices k_i in {-N/2, ..., N/2 - 1}."""
        return _mode_indices(self.dim, self.modes_per_axis)

    def wavenumber_squared(self) -> np.ndarray:
        return _wavenumber_squared(self.dim, self.modes_per_axis, self.length_per_axis)

    def wavenumber_magnitude(self) -> np.ndarray:
        return np.sqrt(self.wavenumber_squared())

    def nyquist_mask(self) -> np.ndarray:
        """True on every mode with some |k_i| = N/2."""
        half = self.modes_per_axis // 2
        mask = np.zeros(self.shape, dtype=bool)
        for k in self.mode_indices():
            mask |= k == -half
        return mask

    def max_wavenumber(self) -> float:
        return np.pi * self.modes_per_axis / self.length_per_axis


@lru_cache(maxsize=32)
def _mode_indices(dim: int, n: int) -> Tuple[np.ndarray, ...]:
    k = np.rint(sfft.fftfreq(n, d=1.0 / n)).astype(int)
    arrays = np.meshgrid(*([k] * dim), indexing="ij")
    for a in arrays:
        a.flags.writeable = False
    return tuple(arrays)


@lru_cache(maxsize=32)
def _wavenumbers(dim: int, n: int, length: float) -> Tuple[np.ndarray, ...]:
    arrays = []
    for k in _mode_indices(dim, n):
        xi = (2.0 * np.pi / length) * k.astype(float)
        xi.flags.writeable = False
        arrays.append(xi)
    return tuple(arrays)


@lru_cache(maxsize=32)
def _wavenumber_squared(dim: int, n: int, length: float) -> np.ndarray:
    k2 = sum(xi**2 for xi in _wavenumbers(dim, n, length))
    k2.flags.writeable = False
    return k2


@lru_cache(maxsize=32)
def _coordinates(dim: int, n: int, length: float) -> Tuple[np.ndarray, ...]:
    x = -0.5 * length + (length / n) * np.arange(n)
    arrays = np.meshgrid(*([x] * dim), indexing="ij")
    for a in arrays:
        a.flags.writeable = False
    return tuple(arrays)


def _check_shape(values: np.ndarray, grid: Grid) -> None:
    if values.shape[values.ndim - grid.dim:] != grid.shape or values.ndim not in (grid.dim, grid.dim + 1):
        raise GridMismatchError(f"array of shape {values.shape} does not live on grid {grid.shape}")


class SpectralField(BaseModel):
    """Fourier coefficients of a real scalar field or of a real vector field."""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    grid: Grid
    coefficients: np.ndarray

    @model_validator(mode="after")
    def _freeze_coefficients(self) -> "SpectralField":
        coeffs = np.array(self.coefficients, dtype=np.complex128)
        _check_shape(coeffs, self.grid)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        return self

    @property
    def is_vector(self) -> bool:
        return self.coefficients.ndim == self.grid.dim + 1

    def component(self, i: int) -> "SpectralField":
        if not self.is_vector:
            raise GridMismatchError("scalar field has no components")
        return SpectralField(grid=self.grid, coefficients=self.coefficients[i])

    def to_physical(self) -> np.ndarray:
        return transform_backward(self)

    def symmetrized(self) -> "SpectralField":
        return SpectralField(grid=self.grid, coefficients=enforce_symmetry(self.coefficients, self.grid))


# ---------------------------------------------------------------------------
# transforms


def forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Unitary forward FFT over the trailing grid axes."""
    return sfft.fftn(values, axes=grid.axes, norm="ortho", workers=settings.RIGIDLID_FFT_WORKERS)


def backward(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Unitary inverse FFT over the trailing grid axes, real part."""
    return sfft.ifftn(coeffs, axes=grid.axes, norm="ortho", workers=settings.RIGIDLID_FFT_WORKERS).real


def transform_forward(field: np.ndarray, grid: Grid) -> SpectralField:
    """
    Transform a real physical field (scalar or vector) to Fourier space.

    Args:
        field: real array of shape ``grid.shape`` or ``(dim, *grid.shape)``
        grid: the grid the samples live on

    Returns:
        SpectralField with unitary-normalized coefficients
    """
    values = np.asarray(field, dtype=float)
    _check_shape(values, grid)
    return SpectralField(grid=grid, coefficients=forward(values, grid))


def transform_backward(sf: SpectralField) -> np.ndarray:
    return backward(sf.coefficients, sf.grid)


def conjugate_partner(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """conj(c(-xi)) for every xi, on the trailing grid axes."""
    flipped = np.flip(coeffs, axis=grid.axes)
    return np.conj(np.roll(flipped, 1, axis=grid.axes))


def enforce_symmetry(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return 0.5 * (coeffs + conjugate_partner(coeffs, grid))


def symmetry_defect(coeffs: np.ndarray, grid: Grid) -> float:
    """Max |c(xi) - conj(c(-xi))| relative to max |c|."""
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - conjugate_partner(coeffs, grid))) / scale)


def strip_nyquist(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return np.where(grid.nyquist_mask(), 0.0, coeffs)


# ---------------------------------------------------------------------------
# multipliers


def bump_profile(y: np.ndarray) -> np.ndarray:
    """phi_0: 1 on |y| <= 1/2, 0 on |y| >= 1, smooth in between."""
    t = np.clip(2.0 - 2.0 * np.abs(np.asarray(y, dtype=float)), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        s = 1.0 - t
        g = np.where(s > 0.0, np.exp(-1.0 / np.where(s > 0.0, s, 1.0)), 0.0)
    return f / (f + g)


class MultiplierSpec(BaseModel):
    """
    Radial Fourier multiplier m(|xi|), optionally times a vector weight.

    ``zero_value`` is the declared value at xi = 0; it replaces whatever the
    radial formula gives there. ``weight`` adds ``i*xi_axis`` ("derivative")
    or ``i*xi_axis/|xi|`` ("riesz", zero at xi = 0).
    """

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    radial_symbol: Callable[[np.ndarray], np.ndarray]
    zero_value: float
    weight: Literal["none", "derivative", "riesz"] = "none"
    axis: int = 0
    name: str = ""

    def evaluate(self, grid: Grid) -> np.ndarray:
        r = grid.wavenumber_magnitude()
        with np.errstate(all="ignore"):
            values = np.array(np.broadcast_to(self.radial_symbol(r), grid.shape), dtype=float)
        values[(0,) * grid.dim] = self.zero_value
        bad = ~np.isfinite(values)
        if bad.any():
            raise MultiplierError(
                f"multiplier {self.name or '<anonymous>'} is not finite on {int(bad.sum())} grid modes"
            )
        if self.weight == "none":
            return values
        if not 0 <= self.axis < grid.dim:
            raise MultiplierError(f"weight axis {self.axis} out of range for a {grid.dim}D grid")
        xi = grid.wavenumbers()[self.axis]
        if self.weight == "derivative":
            return values * (1j * xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            riesz = np.where(r > 0.0, 1j * xi / np.where(r > 0.0, r, 1.0), 0.0)
        return values * riesz


def apply_multiplier(sf: SpectralField, m: MultiplierSpec) -> SpectralField:
    """Multiply every coefficient by the symbol of ``m`` at its wavenumber."""
    return SpectralField(grid=sf.grid, coefficients=sf.coefficients * m.evaluate(sf.grid))


def identity_multiplier() -> MultiplierSpec:
    return MultiplierSpec(radial_symbol=np.ones_like, zero_value=1.0, name="identity")


def bessel_multiplier(power: float, scale: float = 1.0) -> MultiplierSpec:
    """(1 + scale*|xi|^2)^power."""
    return MultiplierSpec(
        radial_symbol=lambda r: (1.0 + scale * r**2) ** power,
        zero_value=1.0,
        name=f"bessel(power={power}, scale={scale})",
    )


def bessel_ratio_multiplier(power: float, scale: float, b: float) -> MultiplierSpec:
    """(1 + b*scale*|xi|^2)^power * (1 + scale*|xi|^2)^(-power), bounded for b >= 0."""
    return MultiplierSpec(
        radial_symbol=lambda r: ((1.0 + b * scale * r**2) / (1.0 + scale * r**2)) ** power,
        zero_value=1.0,
        name=f"bessel_ratio(power={power}, scale={scale}, b={b})",
    )


def cutoff_multiplier(
    mu: float,
    chi_profile: Callable[[np.ndarray], np.ndarray] = bump_profile,
    complement: bool = False,
) -> MultiplierSpec:
    """chi(sqrt(mu)|xi|), or 1 - chi(sqrt(mu)|xi|) when ``complement``."""
    root = float(np.sqrt(mu))
    if complement:
        return MultiplierSpec(radial_symbol=lambda r: 1.0 - chi_profile(root * r), zero_value=0.0, name="high_cutoff")
    return MultiplierSpec(radial_symbol=lambda r: chi_profile(root * r), zero_value=1.0, name="low_cutoff")


def dyadic_symbol(r: np.ndarray, j: int, scale: float = 1.0) -> np.ndarray:
    """P_j(scale*r) = phi_0(2^(-j-1) scale r) - phi_0(2^(-j) scale r)."""
    y = scale * np.asarray(r, dtype=float)
    return bump_profile(2.0 ** (-j - 1) * y) - bump_profile(2.0 ** (-j) * y)


def dyadic_multiplier(j: int, scale: float = 1.0) -> MultiplierSpec:
    return MultiplierSpec(radial_symbol=lambda r: dyadic_symbol(r, j, scale), zero_value=0.0, name=f"dyadic(j={j})")


def low_block_multiplier(j0: int = 0, scale: float = 1.0) -> MultiplierSpec:
    """phi_0(2^(-j0) scale |xi|), the block below the first dyadic annulus j0."""
    return MultiplierSpec(
        radial_symbol=lambda r: bump_profile(2.0 ** (-j0) * scale * r), zero_value=1.0, name=f"low_block(j0={j0})"
    )


def dyadic_filter(sf: SpectralField, j: int, scale: float = 1.0) -> SpectralField:
    return apply_multiplier(sf, dyadic_multiplier(j, scale))


def low_block(sf: SpectralField, j0: int = 0, scale: float = 1.0) -> SpectralField:
    return apply_multiplier(sf, low_block_multiplier(j0, scale))


def dyadic_range(grid: Grid, j0: int = 0, scale: float = 1.0) -> range:
    """
    Block indices j0..J such that low_block(j0) + sum P_j is exactly 1 on the grid.

    The sum telescopes to phi_0(2^(-J-1) scale |xi|), which is 1 once
    2^J >= scale * max|xi|.
    """
    r_max = scale * float(np.max(grid.wavenumber_magnitude()))
    top = max(j0, int(np.ceil(np.log2(r_max))) if r_max > 0 else j0)
    return range(j0, top + 1)


def lowpass_cutoff(
    sf: SpectralField, mu: float, chi_profile: Callable[[np.ndarray], np.ndarray] = bump_profile
) -> SpectralField:
    """chi(sqrt(mu)|D|) applied to ``sf``."""
    return apply_multiplier(sf, cutoff_multiplier(mu, chi_profile))


# ---------------------------------------------------------------------------
# differential operators on coefficient arrays


def gradient(fh: np.ndarray, grid: Grid) -> np.ndarray:
    return np.stack([1j * xi * fh for xi in grid.wavenumbers()])


def divergence(vh: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(1j * xi * vh[i] for i, xi in enumerate(grid.wavenumbers()))


def perp_gradient(fh: np.ndarray, grid: Grid) -> np.ndarray:
    xi1, xi2 = _require_2d(grid)
    return np.stack([-1j * xi2 * fh, 1j * xi1 * fh])


def curl(vh: np.ndarray, grid: Grid) -> np.ndarray:
    """grad_perp . V = -d_2 V_1 + d_1 V_2."""
    xi1, xi2 = _require_2d(grid)
    return -1j * xi2 * vh[0] + 1j * xi1 * vh[1]


def inverse_laplacian_symbol(grid: Grid) -> np.ndarray:
    """-1/|xi|^2 with the zero mode mapped to 0."""
    k2 = grid.wavenumber_squared()
    with np.errstate(divide="ignore"):
        return np.where(k2 > 0.0, -1.0 / np.where(k2 > 0.0, k2, 1.0), 0.0)


def _require_2d(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    if grid.dim != 2:
        raise GridMismatchError("operation requires a 2D grid")
    return grid.wavenumbers()


def gradient_part(vh: np.ndarray, grid: Grid) -> np.ndarray:
    """xi (xi . V) / |xi|^2, zero mode sent to 0; valid in 1D and 2D."""
    xis = grid.wavenumbers()
    k2 = grid.wavenumber_squared()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2 > 0.0, 1.0 / np.where(k2 > 0.0, k2, 1.0), 0.0)
    dot = sum(xi * vh[i] for i, xi in enumerate(xis))
    return np.stack([xi * dot * inv for xi in xis])


def rotational_part(vh: np.ndarray, grid: Grid) -> np.ndarray:
    """xi_perp (xi_perp . V) / |xi|^2 with xi_perp = (-xi_2, xi_1), zero mode sent to 0."""
    xi1, xi2 = _require_2d(grid)
    k2 = grid.wavenumber_squared()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2 > 0.0, 1.0 / np.where(k2 > 0.0, k2, 1.0), 0.0)
    dot = -xi2 * vh[0] + xi1 * vh[1]
    return np.stack([-xi2 * dot * inv, xi1 * dot * inv])


def _require_vector_2d(V: SpectralField) -> None:
    if V.grid.dim != 2:
        raise GridMismatchError("Riesz projectors act on 2D vector fields only")
    if not V.is_vector:
        raise GridMismatchError("Riesz projectors need a vector field")


def riesz_gradient_projector(V: SpectralField) -> SpectralField:
    """grad (grad/Delta) . V"""
    _require_vector_2d(V)
    return SpectralField(grid=V.grid, coefficients=gradient_part(V.coefficients, V.grid))


def riesz_rotational_projector(V: SpectralField) -> SpectralField:
    """grad_perp (grad_perp/Delta) . V"""
    _require_vector_2d(V)
    return SpectralField(grid=V.grid, coefficients=rotational_part(V.coefficients, V.grid))


# ---------------------------------------------------------------------------
# dealiased products


def dealias_mask(grid: Grid, factors: int = 2) -> np.ndarray:
    """
    Truncation band that makes an m-factor product alias-free.

    Keeps |k_i| < N/(m+1) on every axis: the 2/3 rule for quadratic products
    and the 1/2 rule for cubic ones.
    """
    return _dealias_mask(grid.dim, grid.modes_per_axis, max(int(factors), 1))


@lru_cache(maxsize=64)
def _dealias_mask(dim: int, n: int, factors: int) -> np.ndarray:
    cutoff = n / (factors + 1)
    mask = np.ones((n,) * dim, dtype=bool)
    for k in _mode_indices(dim, n):
        mask &= np.abs(k) < cutoff
    mask.flags.writeable = False
    return mask


def product(grid: Grid, *factors: np.ndarray) -> np.ndarray:
    """Dealiased pseudospectral product of scalar coefficient arrays."""
    mask = dealias_mask(grid, len(factors))
    phys = None
    for fh in factors:
        values = backward(fh * mask, grid)
        phys = values if phys is None else phys * values
    return forward(phys, grid) * mask


def truncate(coeffs: np.ndarray, grid: Grid, factors: int = 2) -> np.ndarray:
    return coeffs * dealias_mask(grid, factors)


# ---------------------------------------------------------------------------
# weighted physical-space operations


def gaussian_weight(field: np.ndarray, grid: Grid, x0: Union[float, Sequence[float]]) -> np.ndarray:
    """
    Multiply by exp(-|x - x0|^2) using the plain Euclidean distance.

    Logs a warning when the weight is not negligible at the box edge.
    """
    center = np.atleast_1d(np.asarray(x0, dtype=float))
    if center.shape != (grid.dim,):
        raise GridMismatchError(f"x0 must have {grid.dim} coordinates")
    half = 0.5 * grid.length
    if np.any(np.abs(center) > half):
        raise ValueError(f"x0 = {center.tolist()} lies outside the box [-{half}, {half})")
    edge_distance = float(np.min(half - np.abs(center)))
    if np.exp(-edge_distance**2) > BOUNDARY_WEIGHT_LIMIT:
        logger.warning(
            "Gaussian weight at x0=%s is %.2e at the box edge", center.tolist(), np.exp(-edge_distance**2)
        )
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center))
    return np.asarray(field, dtype=float) * np.exp(-r2)
