"""
Nonlinear tendencies F(U) of the eps-scaled systems dU/dt = -(1/eps) A U + F(U).

abcd family (classical is (0, 0, 0, 1/3)):

    F_zeta = -(1 - mu b Lap)^(-1) div(zeta V)
    F_V    = -(1 - mu d grad div)^(-1) (V.grad) V

Green-Naghdi closes the dt V terms by solving the momentum equation
(1 + mu T) X = -(1/eps) grad zeta - (V.grad)V - mu Q for X = dt V, then

    F_V = -(1 - mu/3 grad div)^(-1) [ (V.grad)V + mu Q + mu (T[eps zeta] - T[0]) X ].

Products are dealiased by spectral truncation (2/3 rule for quadratic
terms); the Green-Naghdi corrections are evaluated on the 1/2-rule band.
"""

import logging

import numpy as np

from ..spectra import Grid, divergence, gradient_part, product, truncate
from .green_naghdi import DEFAULT_MAX_ITER, depth, flat_t_operator, q_operator, solve_momentum, t_operator
from .spec import ModelSpec
from .state import State

logger = logging.getLogger(__name__)


class Nonlinearity:
    """F(U) for one model on one grid, acting on packed arrays ``(1 + dim, *shape)``."""

    def __init__(
        self,
        spec: ModelSpec,
        grid: Grid,
        include_gn_time_terms: bool = True,
        gn_tol: float = 1e-10,
        gn_max_iter: int = DEFAULT_MAX_ITER,
    ):
        self.spec = spec
        self.grid = grid
        self.include_gn_time_terms = include_gn_time_terms
        self.gn_tol = gn_tol
        self.gn_max_iter = gn_max_iter
        k2 = grid.wavenumber_squared()
        a, b, c, d = spec.abcd.coefficients
        self.mass_smoothing = 1.0 / (1.0 + spec.mu * b * k2)
        self.momentum_smoothing = 1.0 / (1.0 + spec.mu * d * k2)
        self.xis = grid.wavenumbers()

    def momentum_inverse(self, w_hat: np.ndarray) -> np.ndarray:
        """(1 - mu d grad div)^(-1) on a vector coefficient array."""
        grad = gradient_part(w_hat, self.grid)
        return (w_hat - grad) + grad * self.momentum_smoothing

    def advection(self, v_hat: np.ndarray) -> np.ndarray:
        """(V.grad)V, dealiased."""
        grid = self.grid
        if grid.dim == 1:
            return (0.5j * self.xis[0] * product(grid, v_hat[0], v_hat[0]))[np.newaxis]
        return np.stack(
            [
                sum(product(grid, v_hat[j], 1j * self.xis[j] * v_hat[i]) for j in range(grid.dim))
                for i in range(grid.dim)
            ]
        )

    def __call__(self, u: np.ndarray) -> np.ndarray:
        grid = self.grid
        zeta_hat, v_hat = u[0], u[1:]
        flux = np.stack([product(grid, zeta_hat, v_hat[i]) for i in range(grid.dim)])
        out = np.empty_like(u)
        out[0] = -self.mass_smoothing * divergence(flux, grid)
        advect = self.advection(v_hat)
        if self.spec.is_green_naghdi and self.include_gn_time_terms:
            advect = advect + self.green_naghdi_correction(zeta_hat, v_hat, advect)
        out[1:] = -self.momentum_inverse(advect)
        return out

    def green_naghdi_correction(self, zeta_hat: np.ndarray, v_hat: np.ndarray, advect: np.ndarray) -> np.ndarray:
        """mu Q + mu (T[eps zeta] - T[0]) dt V on the cubic dealiasing band."""
        grid, spec = self.grid, self.spec
        zeta_c = truncate(zeta_hat, grid, 3)
        v_c = truncate(v_hat, grid, 3)
        h = depth(zeta_c, grid, spec.eps, spec.h0)
        q = q_operator(h, v_c, grid)
        grad_zeta = np.stack([1j * xi * zeta_c for xi in self.xis])
        rhs = -grad_zeta / spec.eps - advect - spec.mu * q
        dt_v = solve_momentum(h, rhs, grid, spec.mu, self.gn_tol, self.gn_max_iter)
        correction = spec.mu * q + spec.mu * (t_operator(h, dt_v, grid) - flat_t_operator(dt_v, grid))
        return truncate(correction, grid, 3)


def nonlinearity(
    spec: ModelSpec,
    U: State,
    include_gn_time_terms: bool = True,
    gn_tol: float = 1e-10,
) -> np.ndarray:
    """
    F(U) as a packed coefficient array ``(1 + dim, *grid.shape)``.

    Args:
        spec: model and parameters
        U: current state
        include_gn_time_terms: for Green-Naghdi, include Q and the dt V closure;
            without them the tendency equals the classical one
        gn_tol: relative residual of the Green-Naghdi elliptic solve

    Returns:
        the nonlinear tendency, zeta component first
    """
    return Nonlinearity(spec, U.grid, include_gn_time_terms, gn_tol)(U.pack())
