"""2D incompressible Euler in vorticity form: dt w + (u.grad) w = 0, u = grad_perp Lap^(-1) w."""

import numpy as np

from ..spectra import Grid, SpectralField, inverse_laplacian_symbol, perp_gradient, product
from ..errors import GridMismatchError


def biot_savart(omega_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Velocity coefficients (u_1, u_2) = (i xi_2, -i xi_1) w / |xi|^2; zero mode 0."""
    if grid.dim != 2:
        raise GridMismatchError("Biot-Savart law needs a 2D grid")
    return perp_gradient(inverse_laplacian_symbol(grid) * omega_hat, grid)


def euler_rhs(omega_hat: np.ndarray, grid: Grid) -> np.ndarray:
    u_hat = biot_savart(omega_hat, grid)
    xi1, xi2 = grid.wavenumbers()
    return -(product(grid, u_hat[0], 1j * xi1 * omega_hat) + product(grid, u_hat[1], 1j * xi2 * omega_hat))


def euler2d_rhs(omega: SpectralField) -> SpectralField:
    """-(u.grad) w with u from the Biot-Savart law, dealiased."""
    if omega.is_vector:
        raise GridMismatchError("vorticity must be a scalar field")
    return SpectralField(grid=omega.grid, coefficients=euler_rhs(omega.coefficients, omega.grid))
