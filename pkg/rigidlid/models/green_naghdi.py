"""
Green-Naghdi dispersive operators and the elliptic momentum closure.

    T[eps zeta] W = -1/(3h) grad[ h^3 div W ]
    Q[eps zeta] V = -1/(3h) grad[ h^3 ((V.grad)(div V) - (div V)^2) ]

with h = 1 + eps*zeta. Vector fields are coefficient arrays of shape
``(dim, *grid.shape)``; in 1D the public helpers accept scalar fields.
"""

import logging

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..errors import ConvergenceError, DepthFloorViolation
from ..spectra import (
    Grid,
    SpectralField,
    backward,
    divergence,
    enforce_symmetry,
    forward,
    gradient,
    gradient_part,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 500


def depth(zeta_hat: np.ndarray, grid: Grid, eps: float, h0: float = 0.0) -> np.ndarray:
    """Physical depth h = 1 + eps*zeta; raises when min h < h0 or h <= 0."""
    h = 1.0 + eps * backward(zeta_hat, grid)
    h_min = float(np.min(h))
    if h_min < h0 or h_min <= 0.0:
        raise DepthFloorViolation(h_min, h0)
    return h


def t_operator(h: np.ndarray, w_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """T[eps zeta] W for a vector coefficient array W."""
    inner = h**3 * backward(divergence(w_hat, grid), grid)
    grad = backward(gradient(forward(inner, grid), grid), grid)
    return forward(-grad / (3.0 * h), grid)


def flat_t_operator(w_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """T[0] W = -(1/3) grad div W."""
    return -gradient(divergence(w_hat, grid), grid) / 3.0


def q_operator(h: np.ndarray, v_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Q[eps zeta] V for a vector coefficient array V."""
    div_hat = divergence(v_hat, grid)
    div = backward(div_hat, grid)
    grad_div = backward(gradient(div_hat, grid), grid)
    v = backward(v_hat, grid)
    advect = sum(v[i] * grad_div[i] for i in range(grid.dim))
    inner = h**3 * (advect - div**2)
    grad = backward(gradient(forward(inner, grid), grid), grid)
    return forward(-grad / (3.0 * h), grid)


def one_plus_mu_t(h: np.ndarray, x_hat: np.ndarray, grid: Grid, mu: float) -> np.ndarray:
    return x_hat + mu * t_operator(h, x_hat, grid)


def flat_inverse(rhs_hat: np.ndarray, grid: Grid, mu: float, mean_depth: float = 1.0) -> np.ndarray:
    """
    Inverse of the constant-depth operator hbar - (mu/3) hbar^3 grad div.

    With ``mean_depth = 1`` this is exactly (1 - mu/3 grad div)^(-1).
    """
    grad = gradient_part(rhs_hat, grid)
    scale = 1.0 + mu * mean_depth**2 * grid.wavenumber_squared() / 3.0
    return ((rhs_hat - grad) + grad / scale) / mean_depth


def solve_momentum(
    h: np.ndarray,
    rhs_hat: np.ndarray,
    grid: Grid,
    mu: float,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """
    Solve (1 + mu T[eps zeta]) X = rhs for X.

    Multiplying by h gives the symmetric positive definite operator
    h X - (mu/3) grad[h^3 div X], solved by conjugate gradients on real
    samples with the flat mean-depth symbol as preconditioner. The returned X
    satisfies ||(1 + mu T) X - rhs|| <= tol ||rhs|| or ConvergenceError is
    raised.
    """
    rhs_hat = enforce_symmetry(rhs_hat, grid)
    rhs_norm = float(np.linalg.norm(rhs_hat))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs_hat)
    if np.max(np.abs(h - 1.0)) == 0.0:
        return flat_inverse(rhs_hat, grid, mu)

    shape = (grid.dim,) + grid.shape
    n = int(np.prod(shape))
    h_min, h_max = float(np.min(h)), float(np.max(h))
    h_bar = float(np.mean(h))
    h3 = h**3

    def weighted(x: np.ndarray) -> np.ndarray:
        X = x.reshape(shape)
        inner = h3 * backward(divergence(forward(X, grid), grid), grid)
        grad = backward(gradient(forward(inner, grid), grid), grid)
        return (h * X - (mu / 3.0) * grad).ravel()

    def precondition(r: np.ndarray) -> np.ndarray:
        return backward(flat_inverse(forward(r.reshape(shape), grid), grid, mu, h_bar), grid).ravel()

    A = LinearOperator((n, n), matvec=weighted, dtype=float)
    M = LinearOperator((n, n), matvec=precondition, dtype=float)
    b = (h * backward(rhs_hat, grid)).ravel()
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x, info = cg(A, b, rtol=0.5 * tol * h_min / h_max, atol=0.0, maxiter=max_iter, M=M, callback=count)
    x_hat = forward(x.reshape(shape), grid)
    residual = float(np.linalg.norm(one_plus_mu_t(h, x_hat, grid, mu) - rhs_hat)) / rhs_norm
    logger.debug("GN solve: %d iterations, info=%d, relative residual %.3e", iterations, info, residual)
    if residual > tol:
        raise ConvergenceError(residual, tol, iterations)
    return x_hat


def _as_vector(field: SpectralField) -> np.ndarray:
    return field.coefficients if field.is_vector else field.coefficients[np.newaxis]


def _like(field: SpectralField, coeffs: np.ndarray) -> SpectralField:
    return SpectralField(grid=field.grid, coefficients=coeffs if field.is_vector else coeffs[0])


def gn_T_apply(zeta: SpectralField, W: SpectralField, eps: float, h0: float = 0.0) -> SpectralField:
    """
    T[eps zeta] W.

    Args:
        zeta: surface elevation
        W: velocity-like field (scalar in 1D, vector in 2D)
        eps: amplitude parameter
        h0: depth floor checked before evaluating

    Returns:
        T[eps zeta] W with the shape of ``W``
    """
    h = depth(zeta.coefficients, zeta.grid, eps, h0)
    return _like(W, t_operator(h, _as_vector(W), W.grid))


def gn_Q_apply(zeta: SpectralField, V: SpectralField, eps: float, h0: float = 0.0) -> SpectralField:
    h = depth(zeta.coefficients, zeta.grid, eps, h0)
    return _like(V, q_operator(h, _as_vector(V), V.grid))


def gn_solve_momentum(
    zeta: SpectralField,
    rhs: SpectralField,
    eps: float,
    mu: float,
    tol: float = 1e-10,
    h0: float = 0.0,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SpectralField:
    """Return X with (1 + mu T[eps zeta]) X = rhs up to relative residual ``tol``."""
    h = depth(zeta.coefficients, zeta.grid, eps, h0)
    return _like(rhs, solve_momentum(h, _as_vector(rhs), rhs.grid, mu, tol, max_iter))
