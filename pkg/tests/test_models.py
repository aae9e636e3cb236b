"""
Tests for the model catalogue: parameters, linear symbols, nonlinear
tendencies, the Green-Naghdi operators and the Euler right-hand side.
"""

import numpy as np
import pytest

from rigidlid.errors import DepthFloorViolation, InadmissibleParametersError
from rigidlid.models import (
    AbcdParams,
    LinearPropagator,
    ModelKind,
    ModelSpec,
    Nonlinearity,
    State,
    biot_savart,
    euler2d_rhs,
    gn_Q_apply,
    gn_solve_momentum,
    gn_T_apply,
    linear_symbol,
    nonlinearity,
    propagate,
    semigroup_symbol,
)
from rigidlid.models.green_naghdi import flat_inverse, flat_t_operator
from rigidlid.models.symbols import dispersion_factors
from rigidlid.solver import InitialData
from rigidlid.spectra import Grid, SpectralField, curl, divergence, forward, symmetry_defect, truncate


class TestParameters:
    def test_classical_defaults(self):
        spec = ModelSpec()
        assert spec.kind == ModelKind.CLASSICAL
        assert spec.abcd.is_classical
        assert spec.label == "classical1d"

    def test_inadmissible_abcd(self):
        with pytest.raises(InadmissibleParametersError):
            AbcdParams(a=0.1, b=0.0, c=0.0, d=0.0).require_admissible()
        with pytest.raises(ValueError):
            ModelSpec(kind=ModelKind.ABCD, abcd=AbcdParams(a=0.0, b=-1.0, c=0.0, d=0.0))

    def test_classical_kind_rejects_other_coefficients(self, sum_zero_abcd):
        with pytest.raises(ValueError, match="classical abcd"):
            ModelSpec(kind=ModelKind.CLASSICAL, abcd=sum_zero_abcd)

    def test_green_naghdi_needs_depth_floor(self):
        with pytest.raises(ValueError, match="depth floor"):
            ModelSpec(kind=ModelKind.GREEN_NAGHDI, h0=0.0)

    @pytest.mark.parametrize("eps", [0.0, 1.5])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            ModelSpec(eps=eps)

    def test_sum_zero_pair_is_nondegenerate(self, sum_zero_abcd):
        assert abs(sum_zero_abcd.total) < 1e-15
        assert sum_zero_abcd.pair_product == pytest.approx(1.0 / 324.0)
        assert sum_zero_abcd.nondegenerate
        assert not AbcdParams(a=0.0, b=0.0, c=0.0, d=0.0).nondegenerate

    def test_flat_record(self, sum_zero_abcd):
        spec = ModelSpec(kind=ModelKind.ABCD, dim=2, eps=0.25, mu=0.5, abcd=sum_zero_abcd)
        record = spec.to_record()
        assert set(record) == {"kind", "dim", "eps", "mu", "a", "b", "c", "d", "h0"}
        assert ModelSpec.from_record(record) == spec

    def test_with_parameters(self, classical1d):
        moved = classical1d.with_parameters(0.03125, 0.25)
        assert (moved.eps, moved.mu, moved.kind) == (0.03125, 0.25, classical1d.kind)


class TestLinearSymbol:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_group_property(self, rng, dim):
        """exp(-t1 A) exp(-t2 A) = exp(-(t1 + t2) A) on random samples."""
        spec = ModelSpec(kind=ModelKind.ABCD, dim=dim, abcd=AbcdParams(a=-1 / 6, b=0.5, c=-1 / 3, d=0.0))
        xi = rng.uniform(-5, 5, 100) if dim == 1 else rng.uniform(0, 5, 100)
        t1, t2 = rng.uniform(-3, 3, 100), rng.uniform(-3, 3, 100)
        for x, a, b in zip(xi, t1, t2):
            lhs = semigroup_symbol(spec, x, a) @ semigroup_symbol(spec, x, b)
            np.testing.assert_allclose(lhs, semigroup_symbol(spec, x, a + b), rtol=1e-12, atol=1e-12)

    def test_quadratic_invariant_1d(self, rng):
        """|zeta|^2 + (p/q)|v|^2 is preserved: M^H H M = H."""
        spec = ModelSpec(kind=ModelKind.ABCD, dim=1, abcd=AbcdParams(a=-0.2, b=0.3, c=-0.1, d=0.4))
        for x, tau in zip(rng.uniform(-5, 5, 100), rng.uniform(-3, 3, 100)):
            p, q = dispersion_factors(spec.abcd, spec.mu, x**2)
            H = np.diag([1.0, p / q])
            M = semigroup_symbol(spec, x, tau)
            np.testing.assert_allclose(M.conj().T @ H @ M, H, rtol=1e-12, atol=1e-12)

    def test_quadratic_invariant_2d(self, rng):
        """|zeta|^2 + p/(q |xi|^2) |div V|^2 is preserved."""
        spec = ModelSpec(dim=2)
        for x, tau in zip(rng.uniform(0.1, 5, 100), rng.uniform(-3, 3, 100)):
            p, q = dispersion_factors(spec.abcd, spec.mu, x**2)
            H = np.diag([1.0, p / (q * x**2)])
            M = semigroup_symbol(spec, x, tau)
            np.testing.assert_allclose(M.conj().T @ H @ M, H, rtol=1e-12, atol=1e-12)

    def test_abcd_classical_matches_classical(self):
        xi = np.linspace(-8, 8, 257)
        classical = ModelSpec(kind=ModelKind.CLASSICAL, dim=1)
        abcd = ModelSpec(kind=ModelKind.ABCD, dim=1, abcd=AbcdParams(a=0.0, b=0.0, c=0.0, d=1.0 / 3.0))
        np.testing.assert_array_equal(linear_symbol(classical, xi), linear_symbol(abcd, xi))
        np.testing.assert_array_equal(semigroup_symbol(classical, xi, 0.7), semigroup_symbol(abcd, xi, 0.7))

    def test_classical_frequency(self):
        """w(xi) = |xi| / sqrt(1 + mu xi^2 / 3) for the classical system."""
        xi = np.linspace(0, 10, 11)
        spec = ModelSpec(mu=0.5)
        M = semigroup_symbol(spec, xi, 1.3)
        np.testing.assert_allclose(M[:, 0, 0].real, np.cos(1.3 * xi / np.sqrt(1 + 0.5 * xi**2 / 3)), atol=1e-14)

    def test_propagator_matches_symbol_1d(self, smooth_field, grid1d, classical1d):
        u = forward(smooth_field(grid1d, components=2), grid1d)
        out = LinearPropagator(grid1d, classical1d)(u, 2.5)
        M = semigroup_symbol(classical1d, grid1d.wavenumbers()[0], 2.5)
        expected = np.einsum("kij,jk->ik", M, u)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_propagator_freezes_rotational_part(self, smooth_field, grid2d, classical2d):
        state = State.unpack(forward(smooth_field(grid2d, components=3), grid2d), grid2d)
        moved = propagate(state, classical2d, 1.7)
        v0, v1 = state.velocity.coefficients, moved.velocity.coefficients
        np.testing.assert_allclose(curl(v1, grid2d), curl(v0, grid2d), atol=1e-12)

    def test_energy_is_invariant(self, smooth_field, grid2d, classical2d):
        u = forward(smooth_field(grid2d, components=3), grid2d)
        prop = LinearPropagator(grid2d, classical2d)
        assert prop.energy(prop(u, 3.1)) == pytest.approx(prop.energy(u), rel=1e-12)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_propagator_drops_nyquist_modes(self, rng, dim):
        grid = Grid(dim=dim, modes_per_axis=32, length_per_axis=20.0)
        spec = ModelSpec(kind=ModelKind.CLASSICAL, dim=dim, eps=0.1)
        u = forward(rng.standard_normal((1 + dim,) + grid.shape), grid)
        assert np.any(u[:, grid.nyquist_mask()] != 0)
        out = LinearPropagator(grid, spec)(u, 1.3)
        assert np.all(out[:, grid.nyquist_mask()] == 0)
        assert symmetry_defect(out, grid) <= 1e-13
        stripped = np.where(grid.nyquist_mask(), 0.0, u)
        np.testing.assert_allclose(out, LinearPropagator(grid, spec)(stripped, 1.3), atol=1e-14)


def _state(grid, amplitude=0.3, rotational=0.0, noise=0.05):
    return InitialData(
        zeta_amplitude=amplitude,
        velocity_amplitude=amplitude,
        rotational_amplitude=rotational,
        width=1.5,
        noise_amplitude=noise,
        seed=3,
    ).build(grid)


class TestNonlinearity:
    @pytest.mark.parametrize(
        "kind,dim",
        [(kind, dim) for kind in ModelKind for dim in (1, 2)],
    )
    def test_mass_tendency_is_mean_free(self, kind, dim, sum_zero_abcd):
        grid = Grid(dim=dim, modes_per_axis=64 if dim == 1 else 32, length_per_axis=24.0)
        abcd = sum_zero_abcd if kind == ModelKind.ABCD else AbcdParams.classical()
        spec = ModelSpec(kind=kind, dim=dim, eps=0.1, abcd=abcd)
        F = nonlinearity(spec, _state(grid, rotational=0.2 if dim == 2 else 0.0))
        assert F[0][(0,) * dim] == 0.0

    @pytest.mark.parametrize("dim", [1, 2])
    def test_green_naghdi_reduces_to_classical(self, dim):
        """Without Q and the dt V closure the Green-Naghdi tendency is the classical one."""
        grid = Grid(dim=dim, modes_per_axis=64 if dim == 1 else 32, length_per_axis=24.0)
        U = _state(grid, rotational=0.2 if dim == 2 else 0.0)
        gn = ModelSpec(kind=ModelKind.GREEN_NAGHDI, dim=dim, eps=0.2)
        classical = ModelSpec(kind=ModelKind.CLASSICAL, dim=dim, eps=0.2)
        lhs = nonlinearity(gn, U, include_gn_time_terms=False)
        rhs = nonlinearity(classical, U)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_green_naghdi_terms_are_small_for_small_mu(self):
        grid = Grid(dim=1, modes_per_axis=64, length_per_axis=24.0)
        U = _state(grid)
        gn = ModelSpec(kind=ModelKind.GREEN_NAGHDI, eps=0.2, mu=1e-4)
        classical = ModelSpec(eps=0.2, mu=1e-4)
        diff = nonlinearity(gn, U) - nonlinearity(classical, U)
        assert np.max(np.abs(diff)) < 1e-2 * np.max(np.abs(nonlinearity(classical, U)))

    def test_abcd_classical_tendency(self):
        grid = Grid(dim=2, modes_per_axis=32, length_per_axis=24.0)
        U = _state(grid, rotational=0.2)
        classical = ModelSpec(kind=ModelKind.CLASSICAL, dim=2)
        abcd = ModelSpec(kind=ModelKind.ABCD, dim=2, abcd=AbcdParams(a=0.0, b=0.0, c=0.0, d=1.0 / 3.0))
        np.testing.assert_array_equal(nonlinearity(classical, U), nonlinearity(abcd, U))

    def test_1d_advection(self, grid1d, classical1d):
        """In 1D the momentum tendency is -(1 - mu/3 dx^2)^(-1) (v v_x)."""
        (x,) = grid1d.coordinates()
        v = 0.5 * np.exp(-(x**2) / 4)
        u = np.stack([np.zeros(grid1d.shape, dtype=complex), forward(v, grid1d)])
        F = Nonlinearity(classical1d, grid1d)(u)
        k2 = grid1d.wavenumber_squared()
        expected = -forward(v * (-0.5 * x * v), grid1d) / (1 + k2 / 3)
        np.testing.assert_allclose(F[1], truncate(expected, grid1d), atol=1e-12)
        np.testing.assert_allclose(F[0], 0.0, atol=1e-14)


class TestGreenNaghdiOperators:
    grid = Grid(dim=1, modes_per_axis=256, length_per_axis=20.0)
    eps = 0.3

    def _fields(self):
        (x,) = self.grid.coordinates()
        zeta = np.exp(-(x**2))
        return x, zeta, 1.0 + self.eps * zeta

    def _sf(self, values):
        return SpectralField(grid=self.grid, coefficients=forward(values, self.grid))

    def test_t_operator_against_closed_form(self):
        """T[eps zeta] W = -1/(3h) (h^3 W')' for W = x exp(-x^2)."""
        x, zeta, h = self._fields()
        g = np.exp(-(x**2))
        W = x * g
        dW = (1 - 2 * x**2) * g
        d2W = (4 * x**3 - 6 * x) * g
        dh = -2 * x * self.eps * g
        expected = -(3 * h**2 * dh * dW + h**3 * d2W) / (3 * h)
        out = gn_T_apply(self._sf(zeta), self._sf(W), self.eps).to_physical()
        np.testing.assert_allclose(out, expected, atol=1e-10)

    def test_q_operator_against_closed_form(self):
        """Q[eps zeta] V = -1/(3h) (h^3 (V V'' - V'^2))' for V = exp(-x^2)."""
        x, zeta, h = self._fields()
        g = np.exp(-(x**2))
        dh = -2 * x * self.eps * g
        # V V'' - V'^2 = -2 exp(-2 x^2)
        d_inner = -2 * (3 * h**2 * dh * g**2 + h**3 * (-4 * x) * g**2)
        expected = -d_inner / (3 * h)
        out = gn_Q_apply(self._sf(zeta), self._sf(g), self.eps).to_physical()
        np.testing.assert_allclose(out, expected, atol=1e-10)

    def test_flat_solve_residual(self):
        """On flat depth the inverse is exact to 1e-14."""
        _, zeta, _ = self._fields()
        rhs = forward(zeta, self.grid)[np.newaxis]
        X = flat_inverse(rhs, self.grid, 1.0)
        residual = X + flat_t_operator(X, self.grid) - rhs
        assert np.linalg.norm(residual) <= 1e-14 * np.linalg.norm(rhs)

    def test_flat_depth_solve_uses_symbol(self):
        zero = self._sf(np.zeros(self.grid.shape))
        _, zeta, _ = self._fields()
        rhs = self._sf(zeta)
        X = gn_solve_momentum(zero, rhs, self.eps, 1.0)
        np.testing.assert_allclose(X.coefficients, flat_inverse(rhs.coefficients[np.newaxis], self.grid, 1.0)[0])

    @pytest.mark.parametrize("mu", [1.0, 0.1])
    def test_solve_round_trip(self, mu):
        """(1 + mu T[eps zeta]) X = rhs after the conjugate-gradient solve."""
        x, zeta, _ = self._fields()
        zeta_sf = self._sf(zeta)
        rhs = self._sf(np.sin(x) * np.exp(-(x**2) / 4))
        X = gn_solve_momentum(zeta_sf, rhs, self.eps, mu, tol=1e-10)
        applied = X.coefficients + mu * gn_T_apply(zeta_sf, X, self.eps).coefficients
        assert np.linalg.norm(applied - rhs.coefficients) <= 1e-10 * np.linalg.norm(rhs.coefficients)

    def test_depth_floor(self):
        x, zeta, _ = self._fields()
        with pytest.raises(DepthFloorViolation):
            gn_T_apply(self._sf(-4.0 * zeta), self._sf(zeta), self.eps, h0=0.5)

    def test_2d_vector_operator(self):
        grid = Grid(dim=2, modes_per_axis=32, length_per_axis=16.0)
        U = _state(grid, rotational=0.2)
        out = gn_T_apply(U.zeta, U.velocity, 0.2)
        assert out.is_vector
        zero = SpectralField(grid=grid, coefficients=np.zeros(grid.shape))
        flat = gn_T_apply(zero, U.velocity, 0.2).coefficients
        np.testing.assert_allclose(flat, flat_t_operator(U.velocity.coefficients, grid), atol=1e-12)


class TestEuler:
    def _shielded(self, grid, width=1.5):
        x, y = grid.coordinates()
        r2 = (x**2 + y**2) / width**2
        return forward((1 - r2) * np.exp(-r2), grid)

    def test_shielded_vortex_is_steady(self):
        """A radial vortex with zero circulation is a steady Euler flow."""
        grid = Grid(dim=2, modes_per_axis=128, length_per_axis=20.0)
        omega = SpectralField(grid=grid, coefficients=self._shielded(grid))
        rhs = euler2d_rhs(omega).to_physical()
        assert np.max(np.abs(rhs)) <= 1e-10

    def test_biot_savart_velocity(self, grid2d):
        w = self._shielded(grid2d)
        w[0, 0] = 0.0
        u = biot_savart(w, grid2d)
        np.testing.assert_allclose(divergence(u, grid2d), 0.0, atol=1e-12)
        np.testing.assert_allclose(curl(u, grid2d), w, atol=1e-12)

    def test_circulation_and_enstrophy(self, grid2d):
        """The dealiased tendency keeps sum w and sum w^2 for band-limited vorticity."""
        state = InitialData(zeta_amplitude=0.0, velocity_amplitude=0.0, rotational_amplitude=1.0, width=1.5).build(grid2d)
        w = truncate(curl(state.velocity.coefficients, grid2d), grid2d)
        rhs = euler2d_rhs(SpectralField(grid=grid2d, coefficients=w)).coefficients
        scale = np.linalg.norm(w) * np.linalg.norm(rhs)
        assert abs(rhs[0, 0]) <= 1e-12 * np.linalg.norm(rhs)
        assert abs(np.vdot(w, rhs).real) <= 1e-10 * scale

    def test_scalar_only(self, grid2d):
        with pytest.raises(ValueError):
            euler2d_rhs(SpectralField(grid=grid2d, coefficients=np.zeros((2,) + grid2d.shape)))
