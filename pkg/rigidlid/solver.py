"""
Time integration of dU/dt = -(1/eps) A(D) U + F(U).

The stiff linear part is integrated exactly through the integrating factor
E(h) = exp(-(h/eps) A(D)); the nonlinear tendency uses the fourth-order
Lawson Runge-Kutta scheme built on E. The 2D Euler reference is integrated
with classical RK4 in vorticity form.

Persisted trajectories are a directory with

* ``header.txt``: ``key=value`` lines (grid, model, snapshot times)
* ``snapshots.bin``: float64 physical samples, C order, shape
  ``(snapshot_count, components, *grid.shape)``
* ``diagnostics.csv``: step, time, mass, energy, min_depth, boundary_mass
"""

import csv
import logging
import math
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import Field, field_validator, model_validator

from .errors import BoundaryContamination, ConfigError, DepthFloorViolation, GridMismatchError, ResolutionError, SolverAbort
from .models import LinearPropagator, ModelSpec, Nonlinearity, State, biot_savart, propagate
from .models.base import ArrayModel, BaseModel
from .models.euler import euler_rhs
from .norms import Components, FieldSeries, x_k_mu_norm
from .spectra import (
    Grid,
    SpectralField,
    backward,
    bump_profile,
    curl,
    forward,
    gradient,
    gradient_part,
    perp_gradient,
    rotational_part,
    strip_nyquist,
)

logger = logging.getLogger(__name__)

HEADER_FORMAT = "rigidlid-trajectory-1"
TIME_TOL = 1e-12


class SolverConfig(BaseModel):
    """Step-size rule, snapshot schedule and abort policy of one run."""

    c1: float = Field(0.01, gt=0.0)
    c2: float = Field(0.5, gt=0.0)
    snapshot_times: Optional[List[float]] = None
    snapshots_per_unit: int = Field(16, ge=1)
    dealias: Literal["on"] = "on"
    gn_tol: float = Field(1e-10, gt=0.0)
    gn_max_iter: int = Field(500, ge=1)
    depth_floor_action: Literal["abort", "warn"] = "abort"
    linear_only: bool = False
    boundary_fraction: float = Field(0.45, gt=0.0, lt=0.5)
    boundary_limit: float = Field(1e-8, gt=0.0)

    @field_validator("snapshot_times")
    @classmethod
    def _sorted_times(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is None:
            return v
        if any(t < 0 for t in v):
            raise ValueError("snapshot times must be nonnegative")
        return sorted(set(float(t) for t in v))

    def dt(self, eps: float) -> float:
        """Delta t = min(c1, c2 * eps)."""
        return min(self.c1, self.c2 * eps)

    def schedule(self, t_end: float) -> List[float]:
        if t_end < 0:
            raise ConfigError(f"final time must be nonnegative, got {t_end}")
        if self.snapshot_times is not None:
            late = [t for t in self.snapshot_times if t > t_end + TIME_TOL]
            if late:
                raise ConfigError(f"snapshot times {late} lie beyond T = {t_end}")
            return list(self.snapshot_times) or [0.0]
        if t_end == 0:
            return [0.0]
        count = int(math.ceil(t_end * self.snapshots_per_unit * (1 - TIME_TOL)))
        return [t_end * i / count for i in range(count + 1)]


class StepDiagnostics(BaseModel):
    step: int
    time: float
    mass: float
    energy: float
    min_depth: float
    boundary_mass: float


class Trajectory(ArrayModel):
    """Snapshots of one run with its per-step diagnostics."""

    model: ModelSpec
    grid: Grid
    snapshots: List[State]
    diagnostics: List[StepDiagnostics] = Field(default_factory=list)
    bound_m: float = 0.0

    @model_validator(mode="after")
    def _ordered(self) -> "Trajectory":
        times = self.times
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        return self

    @property
    def times(self) -> List[float]:
        return [s.t for s in self.snapshots]

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    def field_series(self, components: Components = "all") -> FieldSeries:
        """Physical samples of the selected part, shape ``(n_snapshots, c, *grid.shape)``."""
        return FieldSeries(
            grid=self.grid,
            times=np.array(self.times),
            values=np.stack([select_components(s, components) for s in self.snapshots]),
        )


def select_components(state: State, components: Components = "all") -> np.ndarray:
    """
    Physical samples of part of a state.

    ``gradient`` keeps zeta and replaces the velocity by its gradient part
    grad(grad/Lap) . V; ``rotational`` returns only grad_perp(grad_perp/Lap) . V.
    In 1D every velocity is a gradient and the rotational part is zero.
    """
    grid = state.grid
    u = state.pack()
    if components == "all":
        return backward(u, grid)
    if components == "zeta":
        return backward(u[:1], grid)
    if components == "velocity":
        return backward(u[1:], grid)
    if grid.dim == 1:
        if components == "gradient":
            return backward(u, grid)
        return np.zeros((1,) + grid.shape)
    if components == "gradient":
        return backward(np.concatenate([u[:1], gradient_part(u[1:], grid)]), grid)
    if components == "rotational":
        return backward(rotational_part(u[1:], grid), grid)
    raise ValueError(f"unknown component selection {components!r}")


# ---------------------------------------------------------------------------
# initial data


class InitialData(BaseModel):
    """
    Gaussian initial data.

    1D: zeta0 = A_zeta G, V0 = A_v G with G = exp(-x^2/w^2).
    2D: zeta0 = A_zeta G, V0 = A_v w grad G + A_rot w grad_perp (G_+ - G_-),
    with G_+- Gaussians centred at (+-s/2, 0); the rotational part is a
    counter-rotating vortex pair with mean-free vorticity.
    """

    zeta_amplitude: float = 1.0
    velocity_amplitude: float = 0.5
    rotational_amplitude: float = 0.0
    width: float = Field(1.0, gt=0.0)
    vortex_separation: float = Field(2.0, ge=0.0)
    noise_amplitude: float = Field(0.0, ge=0.0)
    seed: int = 0

    def build(self, grid: Grid) -> State:
        coords = grid.coordinates()
        w = self.width
        gauss = np.exp(-sum(x**2 for x in coords) / w**2)
        zeta = self.zeta_amplitude * gauss
        if grid.dim == 1:
            velocity = self.velocity_amplitude * gauss
        else:
            shift = 0.5 * self.vortex_separation
            pair = np.exp(-((coords[0] - shift) ** 2 + coords[1] ** 2) / w**2) - np.exp(
                -((coords[0] + shift) ** 2 + coords[1] ** 2) / w**2
            )
            velocity = self.velocity_amplitude * w * backward(gradient(forward(gauss, grid), grid), grid)
            velocity = velocity + self.rotational_amplitude * w * backward(perp_gradient(forward(pair, grid), grid), grid)
        if self.noise_amplitude > 0:
            rng = np.random.default_rng(self.seed)
            envelope = bump_profile(grid.wavenumber_magnitude() / (0.25 * grid.max_wavenumber()))
            noise = rng.standard_normal((1 + grid.dim,) + grid.shape) * gauss
            noise = backward(forward(noise, grid) * envelope, grid)
            zeta = zeta + self.noise_amplitude * noise[0]
            velocity = velocity + self.noise_amplitude * (noise[1] if grid.dim == 1 else noise[1:])
        u = np.concatenate([forward(zeta, grid)[np.newaxis], forward(velocity, grid).reshape((grid.dim,) + grid.shape)])
        return State.unpack(strip_nyquist(u, grid), grid, 0.0)

    def vorticity(self, grid: Grid) -> SpectralField:
        """Curl of the initial velocity (2D)."""
        state = self.build(grid)
        return SpectralField(grid=grid, coefficients=curl(state.velocity.coefficients, grid))


# ---------------------------------------------------------------------------
# Boussinesq-type systems


def boundary_fraction(u: np.ndarray, grid: Grid, fraction: float = 0.45) -> float:
    """Share of sum(zeta^2 + |V|^2) carried by the strip |x_i| >= fraction * L."""
    values = backward(u, grid)
    density = np.sum(values**2, axis=0)
    total = float(np.sum(density))
    if total == 0.0:
        return 0.0
    strip = np.zeros(grid.shape, dtype=bool)
    for x in grid.coordinates():
        strip |= np.abs(x) >= fraction * grid.length
    return float(np.sum(density[strip])) / total


class Stepper:
    """Lawson RK4 for one model on one grid, acting on packed coefficient arrays."""

    def __init__(self, spec: ModelSpec, grid: Grid, config: SolverConfig):
        self.spec = spec
        self.grid = grid
        self.config = config
        self.propagator = LinearPropagator(grid, spec)
        self.nonlinearity = None
        if not config.linear_only:
            nl_spec = spec
            if config.depth_floor_action == "warn" and spec.is_green_naghdi:
                nl_spec = spec.model_copy(update={"h0": 1e-12})
            self.nonlinearity = Nonlinearity(nl_spec, grid, gn_tol=config.gn_tol, gn_max_iter=config.gn_max_iter)

    def linear(self, u: np.ndarray, h: float) -> np.ndarray:
        """E(h) u = exp(-(h/eps) A) u."""
        return self.propagator(u, h / self.spec.eps)

    def tendency(self, u: np.ndarray) -> np.ndarray:
        if self.nonlinearity is None:
            return np.zeros_like(u)
        return self.nonlinearity(u)

    def advance(self, u: np.ndarray, h: float) -> np.ndarray:
        if self.nonlinearity is None:
            return self.linear(u, h)
        E = self.linear
        N = self.tendency
        half = 0.5 * h
        u_half = E(u, half)
        u_full = E(u, h)
        k1 = N(u)
        k2 = N(u_half + half * E(k1, half))
        k3 = N(u_half + half * k2)
        k4 = N(u_full + h * E(k3, half))
        return u_full + (h / 6.0) * (E(k1, h) + 2.0 * E(k2 + k3, half) + k4)

    def mass(self, u: np.ndarray) -> float:
        return float(u[0][(0,) * self.grid.dim].real * math.sqrt(self.grid.size) * self.grid.cell_volume)

    def min_depth(self, u: np.ndarray) -> float:
        return float(1.0 + self.spec.eps * np.min(backward(u[0], self.grid)))


def step(spec: ModelSpec, U: State, dt: float, config: Optional[SolverConfig] = None) -> State:
    """
    Advance one Lawson RK4 step of size ``dt``.

    Args:
        spec: model and parameters
        U: current state
        dt: step size, > 0
        config: solver options (GN tolerance, linear-only flag)

    Returns:
        the state at U.t + dt
    """
    if not dt > 0:
        raise ValueError(f"step size must be positive, got {dt}")
    stepper = Stepper(spec, U.grid, config or SolverConfig())
    return State.unpack(stepper.advance(U.pack(), dt), U.grid, U.t + dt)


def _check_depth(stepper: Stepper, u: np.ndarray, t: float, warned: Dict[str, bool]) -> float:
    depth = stepper.min_depth(u)
    h0 = stepper.spec.h0
    if depth < h0:
        if stepper.config.depth_floor_action == "abort":
            raise DepthFloorViolation(depth, h0, t)
        if not warned.get("depth"):
            logger.warning("depth floor violated at t=%.4g: min depth %.4g < h0 = %.4g", t, depth, h0)
            warned["depth"] = True
    return depth


def run(spec: ModelSpec, U0: State, T_end: float, config: Optional[SolverConfig] = None) -> Trajectory:
    """
    Integrate from U0 to T_end, recording snapshots and per-step diagnostics.

    Args:
        spec: model and parameters
        U0: initial state, depth floor and boundary decay are checked first
        T_end: final time, >= 0
        config: step rule, snapshot schedule and abort policy

    Returns:
        Trajectory with snapshots at the scheduled times and the measured bound M

    Raises:
        DepthFloorViolation: min(1 + eps*zeta) < h0 with the abort policy
        BoundaryContamination: boundary strip carries more than the allowed fraction
        ConvergenceError: Green-Naghdi elliptic solve failed
    """
    config = config or SolverConfig()
    grid = U0.grid
    if spec.dim != grid.dim:
        raise GridMismatchError(f"{spec.label} model on a {grid.dim}D grid")
    schedule = [U0.t + s for s in config.schedule(T_end)]
    stepper = Stepper(spec, grid, config)
    dt = config.dt(spec.eps)
    warned: Dict[str, bool] = {}

    u = U0.pack().copy()
    t = U0.t
    _check_depth(stepper, u, t, warned)
    edge = boundary_fraction(u, grid, config.boundary_fraction)
    if edge > config.boundary_limit:
        raise BoundaryContamination(edge, config.boundary_limit, t)

    snapshots: List[State] = []
    diagnostics: List[StepDiagnostics] = []
    n_step = 0

    def record(u: np.ndarray, t: float, depth: float, edge: float) -> None:
        diagnostics.append(
            StepDiagnostics(
                step=n_step,
                time=t,
                mass=stepper.mass(u),
                energy=stepper.propagator.energy(u),
                min_depth=depth,
                boundary_mass=edge,
            )
        )

    record(u, t, stepper.min_depth(u), edge)
    logger.info("run %s eps=%g mu=%g: dt=%.3g, T=%g, %d snapshots", spec.label, spec.eps, spec.mu, dt, T_end, len(schedule))
    try:
        for target in schedule:
            span = target - t
            count = int(math.ceil(span / dt * (1 - TIME_TOL))) if span > TIME_TOL else 0
            for i in range(count):
                h = dt if i < count - 1 else span - (count - 1) * dt
                u = stepper.advance(u, h)
                n_step += 1
                t = target if i == count - 1 else t + h
                depth = _check_depth(stepper, u, t, warned)
                edge = boundary_fraction(u, grid, config.boundary_fraction)
                record(u, t, depth, edge)
                if edge > config.boundary_limit:
                    raise BoundaryContamination(edge, config.boundary_limit, t)
                if not np.all(np.isfinite(u)):
                    raise SolverAbort(f"non-finite state at t={t:.6g}", t)
            snapshots.append(State.unpack(u.copy(), grid, target))
    except SolverAbort as exc:
        if exc.time is None:
            exc.time = t
        logger.warning("run %s eps=%g mu=%g aborted: %s", spec.label, spec.eps, spec.mu, exc)
        raise

    bound = max(x_k_mu_norm(s, 3, spec.mu) for s in snapshots)
    return Trajectory(model=spec, grid=grid, snapshots=snapshots, diagnostics=diagnostics, bound_m=bound)


def corrector_reference(spec: ModelSpec, U0: State, t: float) -> State:
    """
    Free linear evolution exp(-(t/eps) A(D)) U0.

    In 2D the comparison object is (zeta, grad(grad/Lap) . V): the velocity
    is replaced by its gradient part.
    """
    if t < 0:
        raise ValueError(f"corrector time must be nonnegative, got {t}")
    evolved = propagate(U0, spec, t / spec.eps)
    if U0.grid.dim == 1:
        return State(t=t, zeta=evolved.zeta, velocity=evolved.velocity)
    projected = gradient_part(evolved.velocity.coefficients, U0.grid)
    return State(t=t, zeta=evolved.zeta, velocity=SpectralField(grid=U0.grid, coefficients=projected))


def corrector_series(spec: ModelSpec, U0: State, times: List[float], components: Components = "all") -> FieldSeries:
    """Physical samples of the corrector at every snapshot time."""
    values = [select_components(corrector_reference(spec, U0, t), components) for t in times]
    return FieldSeries(grid=U0.grid, times=np.array(times), values=np.stack(values))


# ---------------------------------------------------------------------------
# incompressible Euler


class EulerDiagnostics(BaseModel):
    step: int
    time: float
    circulation: float
    enstrophy: float
    cfl: float


class EulerTrajectory(ArrayModel):
    """Vorticity snapshots of a 2D Euler run."""

    grid: Grid
    snapshots: List[SpectralField]
    times: List[float]
    diagnostics: List[EulerDiagnostics] = Field(default_factory=list)

    def velocity(self, i: int) -> np.ndarray:
        """Physical Biot-Savart velocity of snapshot ``i``."""
        return backward(biot_savart(self.snapshots[i].coefficients, self.grid), self.grid)

    def field_series(self, components: Components = "rotational") -> FieldSeries:
        """Biot-Savart velocity at every snapshot; it is divergence-free, so only velocity selections apply."""
        if components not in ("rotational", "velocity", "all"):
            raise ValueError(f"Euler reference has no {components!r} part")
        return FieldSeries(
            grid=self.grid,
            times=np.array(self.times),
            values=np.stack([self.velocity(i) for i in range(len(self.times))]),
        )


def run_euler2d(omega0: SpectralField, T_end: float, config: Optional[SolverConfig] = None) -> EulerTrajectory:
    """
    Classical RK4 for dt w = -(u . grad) w with u from the Biot-Savart law.

    Args:
        omega0: mean-free initial vorticity on a 2D grid
        T_end: final time, >= 0
        config: uses c1 as step size and the snapshot schedule

    Returns:
        EulerTrajectory with vorticity snapshots

    Raises:
        ResolutionError: CFL number above 1
    """
    config = config or SolverConfig()
    grid = omega0.grid
    if grid.dim != 2 or omega0.is_vector:
        raise ValueError("Euler reference needs a scalar vorticity on a 2D grid")
    w = omega0.coefficients.copy()
    zero = abs(w[0, 0])
    if zero > 1e-12 * max(float(np.max(np.abs(w))), 1e-300):
        raise ValueError("initial vorticity must be mean-free")
    schedule = config.schedule(T_end)
    dt = config.c1
    cell = grid.cell_volume

    def diagnostics(n: int, t: float, w: np.ndarray) -> EulerDiagnostics:
        omega = backward(w, grid)
        speed = np.sqrt(np.sum(backward(biot_savart(w, grid), grid) ** 2, axis=0))
        return EulerDiagnostics(
            step=n,
            time=t,
            circulation=float(np.sum(omega) * cell),
            enstrophy=float(np.sum(omega**2) * cell),
            cfl=float(dt * np.max(speed) / grid.dx),
        )

    t = 0.0
    n = 0
    snapshots, times = [], []
    records = [diagnostics(0, 0.0, w)]
    for target in schedule:
        span = target - t
        count = int(math.ceil(span / dt * (1 - TIME_TOL))) if span > TIME_TOL else 0
        for i in range(count):
            h = dt if i < count - 1 else span - (count - 1) * dt
            k1 = euler_rhs(w, grid)
            k2 = euler_rhs(w + 0.5 * h * k1, grid)
            k3 = euler_rhs(w + 0.5 * h * k2, grid)
            k4 = euler_rhs(w + h * k3, grid)
            w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            n += 1
            t = target if i == count - 1 else t + h
            record = diagnostics(n, t, w)
            records.append(record)
            if record.cfl > 1.0:
                raise ResolutionError(f"Euler CFL number {record.cfl:.2f} > 1 at t={t:.4g}; reduce c1")
        snapshots.append(SpectralField(grid=grid, coefficients=w.copy()))
        times.append(target)
    return EulerTrajectory(grid=grid, snapshots=snapshots, times=times, diagnostics=records)


# ---------------------------------------------------------------------------
# persistence


def _header(traj: Trajectory) -> Dict[str, str]:
    record = traj.model.to_record()
    header = {
        "format": HEADER_FORMAT,
        "dim": str(traj.grid.dim),
        "modes_per_axis": str(traj.grid.modes_per_axis),
        "length_per_axis": repr(traj.grid.length_per_axis),
        "components": str(1 + traj.grid.dim),
        "dtype": "float64",
        "order": "C",
        "snapshot_count": str(len(traj.snapshots)),
        "times": ",".join(repr(float(t)) for t in traj.times),
        "bound_m": repr(traj.bound_m),
    }
    header.update({f"model.{k}": (v if isinstance(v, str) else repr(v)) for k, v in record.items()})
    return header


def save_trajectory(traj: Trajectory, out_dir: Union[str, Path]) -> Path:
    """
    Write header.txt, snapshots.bin and diagnostics.csv into ``out_dir``.

    Files are written to a temporary directory first and moved into place,
    so a failed write leaves no partial trajectory behind.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".trajectory-", dir=out_dir))
    try:
        with open(staging / "header.txt", "w") as fh:
            for key, value in _header(traj).items():
                fh.write(f"{key}={value}\n")
        np.stack([s.physical() for s in traj.snapshots]).astype(np.float64).tofile(staging / "snapshots.bin")
        with open(staging / "diagnostics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "time", "mass", "energy", "min_depth", "boundary_mass"])
            for d in traj.diagnostics:
                writer.writerow([d.step, repr(d.time), repr(d.mass), repr(d.energy), repr(d.min_depth), repr(d.boundary_mass)])
        for name in ("header.txt", "snapshots.bin", "diagnostics.csv"):
            os.replace(staging / name, out_dir / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return out_dir


def read_header(path: Union[str, Path]) -> Dict[str, str]:
    header = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                header[key] = value
    return header


def load_trajectory(out_dir: Union[str, Path]) -> Trajectory:
    """Read a trajectory written by save_trajectory (diagnostics included)."""
    out_dir = Path(out_dir)
    header = read_header(out_dir / "header.txt")
    if header.get("format") != HEADER_FORMAT:
        raise ValueError(f"{out_dir} does not hold a {HEADER_FORMAT} trajectory")
    grid = Grid(
        dim=int(header["dim"]),
        modes_per_axis=int(header["modes_per_axis"]),
        length_per_axis=float(header["length_per_axis"]),
    )
    model = ModelSpec.from_record(
        {
            k.split(".", 1)[1]: (v if k == "model.kind" else (int(v) if k == "model.dim" else float(v)))
            for k, v in header.items()
            if k.startswith("model.")
        }
    )
    times = [float(t) for t in header["times"].split(",")]
    shape = (len(times), 1 + grid.dim) + grid.shape
    data = np.fromfile(out_dir / "snapshots.bin", dtype=np.float64).reshape(shape)
    snapshots = [State.unpack(forward(d, grid), grid, t) for d, t in zip(data, times)]
    diagnostics = []
    with open(out_dir / "diagnostics.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            diagnostics.append(
                StepDiagnostics(
                    step=int(row["step"]),
                    **{k: float(row[k]) for k in ("time", "mass", "energy", "min_depth", "boundary_mass")},
                )
            )
    return Trajectory(
        model=model, grid=grid, snapshots=snapshots, diagnostics=diagnostics, bound_m=float(header["bound_m"])
    )
