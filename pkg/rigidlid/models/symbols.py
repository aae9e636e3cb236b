"""
Linear part of the abcd / classical / Green-Naghdi systems.

The evolution is dU/dt = -(1/eps) A(D) U + F(U). In 1D, A acts on
(zeta, V) with

    A = [[0, i xi p], [i xi q, 0]],  p = (1 - mu a xi^2)/(1 + mu b xi^2),
                                     q = (1 - mu c xi^2)/(1 + mu d xi^2),

and in 2D on (zeta, div V) with A = [[0, p], [-|xi|^2 q, 0]]. In both cases
A^2 = -w^2 I with w = |xi| sqrt(p q) = g(sqrt(mu)|xi|)/sqrt(mu), hence

    exp(-tau A) = cos(tau w) I - sin(tau w)/w A.
"""

from typing import Dict, Tuple

import numpy as np

from ..spectra import Grid
from .base import BaseModel
from .spec import AbcdParams, ModelSpec
from .state import State


class PhasePair(BaseModel):
    """Dispersion phase g and amplitude ratio R of an abcd system."""

    abcd: AbcdParams

    def _rates(self) -> Tuple[np.ndarray, np.ndarray]:
        a, b, c, d = self.abcd.coefficients
        kappa = np.array([-a, -c, b, d], dtype=float)
        sign = np.array([1.0, 1.0, -1.0, -1.0])
        return kappa, sign

    def dispersion_ratio(self, y):
        """P(y) = (1 - a y^2)(1 - c y^2) / ((1 + b y^2)(1 + d y^2))."""
        a, b, c, d = self.abcd.coefficients
        u = np.asarray(y, dtype=float) ** 2
        return (1 - a * u) * (1 - c * u) / ((1 + b * u) * (1 + d * u))

    def g(self, y):
        y = np.asarray(y, dtype=float)
        return y * np.sqrt(self.dispersion_ratio(y))

    def R(self, y):
        a, b, c, d = self.abcd.coefficients
        u = np.asarray(y, dtype=float) ** 2
        return np.sqrt((1 - a * u) * (1 + d * u) / ((1 + b * u) * (1 - c * u)))

    def _log_derivatives(self, u: np.ndarray):
        """d^n/du^n of ln P(u), n = 1..4."""
        kappa, sign = self._rates()
        out = []
        fact = 1.0
        for n in range(1, 5):
            if n > 1:
                fact *= n - 1
            terms = [s * (-1.0) ** (n - 1) * fact * k**n / (1.0 + k * u) ** n for k, s in zip(kappa, sign)]
            out.append(sum(terms))
        return out

    def derivatives(self, y) -> Tuple[np.ndarray, ...]:
        """
        Closed-form (g, g', g'', g''', g'''') at ``y``.

        With S = sqrt(P) and phi = ln S = ln(P)/2 written in u = y^2, the
        derivatives of S follow from those of phi, and g^(n) = n S^(n-1) + y S^(n).
        """
        y = np.asarray(y, dtype=float)
        u = y * y
        h1, h2, h3, h4 = self._log_derivatives(u)
        S = np.sqrt(self.dispersion_ratio(y))
        p1 = y * h1
        p2 = h1 + 2 * u * h2
        p3 = 2 * y * (3 * h2 + 2 * u * h3)
        p4 = 6 * h2 + 24 * u * h3 + 8 * u * u * h4
        S1 = S * p1
        S2 = S * (p2 + p1**2)
        S3 = S * (p3 + 3 * p1 * p2 + p1**3)
        S4 = S * (p4 + 4 * p1 * p3 + 3 * p2**2 + 6 * p1**2 * p2 + p1**4)
        g0 = y * S
        g1 = S + y * S1
        g2 = 2 * S1 + y * S2
        g3 = 3 * S2 + y * S3
        g4 = 4 * S3 + y * S4
        return g0, g1, g2, g3, g4


def dispersion_factors(abcd: AbcdParams, mu: float, xi_sq: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """p(xi), q(xi) of the 1D symbol; both equal 1 at xi = 0."""
    a, b, c, d = abcd.coefficients
    s = mu * np.asarray(xi_sq, dtype=float)
    return (1 - a * s) / (1 + b * s), (1 - c * s) / (1 + d * s)


def linear_symbol(spec: ModelSpec, xi) -> np.ndarray:
    """
    Symbol A(xi) as an array of shape ``(..., 2, 2)``.

    In 1D ``xi`` is the signed wavenumber; in 2D it is |xi| and A acts on
    (zeta_hat, (div V)_hat).
    """
    spec.abcd.require_admissible()
    xi = np.asarray(xi, dtype=float)
    p, q = dispersion_factors(spec.abcd, spec.mu, xi**2)
    A = np.zeros(xi.shape + (2, 2), dtype=complex)
    if spec.dim == 1:
        A[..., 0, 1] = 1j * xi * p
        A[..., 1, 0] = 1j * xi * q
    else:
        A[..., 0, 1] = p
        A[..., 1, 0] = -(xi**2) * q
    return A


def frequency(spec: ModelSpec, xi) -> np.ndarray:
    """w(xi) = |xi| sqrt(p q)."""
    xi = np.asarray(xi, dtype=float)
    p, q = dispersion_factors(spec.abcd, spec.mu, xi**2)
    return np.abs(xi) * np.sqrt(p * q)


def _cos_sin(omega: np.ndarray, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    # sin(tau w)/w, equal to tau at w = 0
    return np.cos(tau * omega), tau * np.sinc(tau * omega / np.pi)


def semigroup_symbol(spec: ModelSpec, xi, tau: float) -> np.ndarray:
    """exp(-tau A(xi)) as an array of shape ``(..., 2, 2)``."""
    A = linear_symbol(spec, xi)
    C, S = _cos_sin(frequency(spec, xi), float(tau))
    M = -S[..., None, None] * A
    M[..., 0, 0] += C
    M[..., 1, 1] += C
    return M


class LinearPropagator:
    """
    exp(-tau A(D)) acting on packed state arrays ``(1 + dim, *grid.shape)``.

    In 2D the velocity is split into its gradient part, which evolves
    together with zeta through div V, and its rotational part, which the
    linear flow leaves unchanged.
    Nyquist modes are zeroed on input: i xi has no real counterpart there.
    """

    def __init__(self, grid: Grid, spec: ModelSpec):
        spec.abcd.require_admissible()
        self.grid = grid
        self.spec = spec
        self.xis = grid.wavenumbers()
        self.k2 = grid.wavenumber_squared()
        self.nyquist = grid.nyquist_mask()
        self.p, self.q = dispersion_factors(spec.abcd, spec.mu, self.k2)
        self.omega = np.sqrt(self.k2 * self.p * self.q)
        with np.errstate(divide="ignore"):
            self.inv_k2 = np.where(self.k2 > 0.0, 1.0 / np.where(self.k2 > 0.0, self.k2, 1.0), 0.0)
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def _factors(self, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        key = float(tau)
        if key not in self._cache:
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[key] = _cos_sin(self.omega, key)
        return self._cache[key]

    def __call__(self, u: np.ndarray, tau: float) -> np.ndarray:
        u = np.where(self.nyquist, 0.0, u)
        if tau == 0.0:
            return u
        C, S = self._factors(tau)
        zeta = u[0]
        out = np.empty_like(u)
        if self.grid.dim == 1:
            xi = self.xis[0]
            v = u[1]
            out[0] = C * zeta - S * (1j * xi * self.p) * v
            out[1] = -S * (1j * xi * self.q) * zeta + C * v
            return out
        div = sum(1j * xi * u[1 + i] for i, xi in enumerate(self.xis))
        new_div = S * self.k2 * self.q * zeta + C * div
        out[0] = C * zeta - S * self.p * div
        change = new_div - div
        for i, xi in enumerate(self.xis):
            out[1 + i] = u[1 + i] - 1j * xi * self.inv_k2 * change
        return out

    def energy_density(self, u: np.ndarray) -> np.ndarray:
        """Modewise |zeta|^2 + (p/q)|V_grad|^2 + |V_rot|^2."""
        zeta = u[0]
        ratio = self.p / self.q
        if self.grid.dim == 1:
            return np.abs(zeta) ** 2 + ratio * np.abs(u[1]) ** 2
        div = sum(1j * xi * u[1 + i] for i, xi in enumerate(self.xis))
        grad_sq = np.abs(div) ** 2 * self.inv_k2
        total_sq = sum(np.abs(u[1 + i]) ** 2 for i in range(self.grid.dim))
        # |V|^2 = |V_grad|^2 + |V_rot|^2 modewise; the zero mode counts as rotational
        return np.abs(zeta) ** 2 + ratio * grad_sq + (total_sq - grad_sq)

    def energy(self, u: np.ndarray) -> float:
        return float(np.sum(self.energy_density(u)) * self.grid.cell_volume)


def propagate(state: State, spec: ModelSpec, tau: float) -> State:
    """Apply exp(-tau A(D)) to a state; time stamp is left unchanged."""
    prop = LinearPropagator(state.grid, spec)
    return State.unpack(prop(state.pack(), tau), state.grid, state.t)
