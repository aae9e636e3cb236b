"""
Convergence-rate experiments.

An ExperimentSpec describes an eps-sweep (optionally over several mu) of
one model from one family of initial data. ``run_sweep`` solves every
(eps, mu) cell, measures the requested norms of the difference between the
solution and its comparison object, and returns the raw table.
``compute_report`` fits log(value) against log(eps) and compares the
slopes with the theoretical exponents; ``render_report`` writes CSV, JSON
and SVG files.
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, ValidationError, field_serializer, field_validator, model_validator

from .config import settings
from .errors import ConfigError, FitError, SolverAbort
from .models import ModelKind, ModelSpec
from .models.base import BaseModel
from .norms import Components, FieldSeries, MixedNormSpec, mixed_norm, morawetz_norm
from .phase import PhaseClassification, classify
from .solver import EulerTrajectory, InitialData, SolverConfig, corrector_series, run, run_euler2d
from .spectra import Grid

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent / "presets"
CSV_COLUMNS = ["theorem_tag", "model", "eps", "mu", "q", "r", "norm_kind", "comparison", "value", "run_status"]
TARGET_RULES = ("1/(2p)", "1/(2p0)", "1/(2p2d)", "sigma/2", "sigma2d/2", "tilde_sigma/2")
SIGMA_RULES = ("sigma/2", "sigma2d/2")
SIGMA_FLOOR = 0.25


def _parse_exponent(v: Union[float, str]) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def fmt_exponent(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


# ---------------------------------------------------------------------------
# experiment description


class NormRequest(BaseModel):
    """One measured quantity of a sweep and the exponent it is tested against."""

    kind: Literal["mixed", "morawetz"] = "mixed"
    comparison: Literal["semigroup_corrector", "euler_rotational", "zero"] = "semigroup_corrector"
    components: Components = "all"
    q: float = 2.0
    r: float = 2.0
    constraint: Optional[Tuple[float, float]] = None
    target: Optional[Union[float, str]] = None
    plus_inverse_q: bool = False
    fit_model: Literal["pure_power", "power_with_log"] = "pure_power"
    mu_values: Optional[List[float]] = None
    mu_power: Optional[float] = None
    mu_uniform: bool = False
    sigma_floor: Optional[float] = None

    @field_validator("q", "r", mode="before")
    @classmethod
    def _exponent(cls, v):
        return _parse_exponent(v)

    @field_serializer("q", "r")
    def _dump_exponent(self, v: float):
        return "inf" if math.isinf(v) else v

    @model_validator(mode="after")
    def _consistent(self) -> "NormRequest":
        if self.comparison == "euler_rotational" and self.components != "rotational":
            raise ValueError("the Euler comparison measures the rotational velocity")
        if self.kind == "mixed":
            MixedNormSpec(q=self.q, r=self.r, constraint=self.constraint)
        return self

    @property
    def norm_kind(self) -> str:
        return f"{self.kind}:{self.components}"

    @property
    def measurement_key(self) -> Tuple[str, str, str, str]:
        return (self.norm_kind, self.comparison, fmt_exponent(self.q), fmt_exponent(self.r))

    @property
    def norm_id(self) -> str:
        if self.kind == "morawetz":
            return f"morawetz-{self.components}-{self.comparison}"
        return f"{self.kind}-{self.components}-{self.comparison}-q{_label(self.q)}-r{_label(self.r)}"

    def mixed_spec(self) -> MixedNormSpec:
        return MixedNormSpec(q=self.q, r=self.r, constraint=self.constraint)


def _label(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:g}"


class ExperimentSpec(BaseModel):
    """
    Full description of an eps-sweep.

    ``eps_list`` is stored in strictly decreasing order; duplicates are
    rejected. Every cell shares the grid, the initial data and the solver
    options.
    """

    tag: str
    description: str = ""
    model: ModelSpec
    eps_list: List[float] = Field(..., min_length=1)
    mu_list: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    grid: Grid
    initial: InitialData = Field(default_factory=InitialData)
    t_end: float = Field(1.0, ge=0.0)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    norms: List[NormRequest] = Field(default_factory=list)
    tolerance: float = Field(0.1, ge=0.0)
    uniformity_tolerance: float = Field(0.1, ge=0.0)

    @field_validator("eps_list")
    @classmethod
    def _decreasing(cls, v: List[float]) -> List[float]:
        if len(set(v)) != len(v):
            raise ValueError("eps_list contains duplicates")
        if any(not 0 < e <= 1 for e in v):
            raise ValueError("every eps must lie in (0, 1]")
        return sorted(v, reverse=True)

    @field_validator("mu_list")
    @classmethod
    def _mu_range(cls, v: List[float]) -> List[float]:
        if any(not 0 < m <= 1 for m in v):
            raise ValueError("every mu must lie in (0, 1]")
        return sorted(set(v), reverse=True)

    @model_validator(mode="after")
    def _dims(self) -> "ExperimentSpec":
        if self.model.dim != self.grid.dim:
            raise ValueError(f"model is {self.model.dim}D but the grid is {self.grid.dim}D")
        return self

    def cells(self) -> List[Tuple[float, float]]:
        return [(eps, mu) for mu in self.mu_list for eps in self.eps_list]

    def estimated_steps(self) -> int:
        return sum(int(math.ceil(self.t_end / self.solver.dt(eps))) for eps, _ in self.cells())

    def measurements(self) -> List[NormRequest]:
        """Norm requests with distinct measurements, in order of first appearance."""
        seen = {}
        for request in self.norms:
            seen.setdefault(request.measurement_key, request)
        return list(seen.values())

    @property
    def needs_euler(self) -> bool:
        return any(n.comparison == "euler_rotational" for n in self.norms)


class RawRow(BaseModel):
    theorem_tag: str
    model: str
    eps: float
    mu: float
    q: str
    r: str
    norm_kind: str
    comparison: str
    value: float
    run_status: str = "ok"

    def csv_record(self) -> List[str]:
        return [
            self.theorem_tag,
            self.model,
            repr(self.eps),
            repr(self.mu),
            self.q,
            self.r,
            self.norm_kind,
            self.comparison,
            repr(self.value),
            self.run_status,
        ]


# ---------------------------------------------------------------------------
# sweep


def _measure(request: NormRequest, diff: FieldSeries) -> float:
    if request.kind == "morawetz":
        return morawetz_norm(diff)
    return mixed_norm(diff, spec=request.mixed_spec())


def run_cell(spec: ExperimentSpec, eps: float, mu: float, euler: Optional[FieldSeries] = None) -> List[RawRow]:
    """Solve one (eps, mu) cell and measure every requested norm."""
    model = spec.model.with_parameters(eps, mu)

    def row(request: NormRequest, value: float, status: str = "ok") -> RawRow:
        return RawRow(
            theorem_tag=spec.tag,
            model=model.label,
            eps=eps,
            mu=mu,
            q=fmt_exponent(request.q),
            r=fmt_exponent(request.r),
            norm_kind=request.norm_kind,
            comparison=request.comparison,
            value=value,
            run_status=status,
        )

    U0 = spec.initial.build(spec.grid)
    try:
        traj = run(model, U0, spec.t_end, spec.solver)
    except SolverAbort as exc:
        status = f"{type(exc).__name__}: {exc}"
        return [row(request, math.nan, status) for request in spec.measurements()]

    logger.info("cell eps=%g mu=%g finished, M = %.4g", eps, mu, traj.bound_m)
    rows = []
    for request in spec.measurements():
        solution = traj.field_series(request.components)
        if request.comparison == "semigroup_corrector":
            diff = solution - corrector_series(model, U0, traj.times, request.components)
        elif request.comparison == "euler_rotational":
            diff = solution - euler
        else:
            diff = solution
        rows.append(row(request, _measure(request, diff)))
    return rows


def _cell_job(args) -> Tuple[Tuple[float, float], List[RawRow]]:
    spec, eps, mu, euler = args
    return (eps, mu), run_cell(spec, eps, mu, euler)


def euler_reference(spec: ExperimentSpec) -> FieldSeries:
    """Biot-Savart velocity of the Euler flow started from curl V0."""
    omega0 = spec.initial.vorticity(spec.grid)
    traj: EulerTrajectory = run_euler2d(omega0, spec.t_end, spec.solver)
    return traj.field_series()


def run_sweep(spec: ExperimentSpec, jobs: Optional[int] = None) -> List[RawRow]:
    """
    Run every (eps, mu) cell of ``spec`` and return the raw table.

    Args:
        spec: experiment description
        jobs: worker processes; 1 runs in-process

    Returns:
        rows ordered by mu, then eps (decreasing), then norm request
    """
    jobs = jobs or settings.RIGIDLID_JOBS
    logger.info(
        "sweep %s: %d cells, about %d steps on %d modes",
        spec.tag,
        len(spec.cells()),
        spec.estimated_steps(),
        spec.grid.size,
    )
    euler = None
    if spec.needs_euler:
        if spec.grid.dim != 2:
            raise ConfigError("the Euler comparison needs a 2D grid")
        euler = euler_reference(spec)

    tasks = [(spec, eps, mu, euler) for eps, mu in spec.cells()]
    results: Dict[Tuple[float, float], List[RawRow]] = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, rows in pool.map(_cell_job, tasks):
                results[key] = rows
    else:
        for task in tasks:
            key, rows = _cell_job(task)
            results[key] = rows
    return [row for cell in spec.cells() for row in results[cell]]


# ---------------------------------------------------------------------------
# fitting


class FitResult(BaseModel):
    slope: float
    intercept: float
    residual: float


def _log_abscissa(eps: np.ndarray, mu: float, t_end: float) -> np.ndarray:
    return np.log(eps * np.log1p(mu * t_end / eps**2) / np.sqrt(mu))


def fit_rate(
    eps: Sequence[float],
    values: Sequence[float],
    model: Literal["pure_power", "power_with_log"] = "pure_power",
    mu: float = 1.0,
    t_end: float = 1.0,
) -> FitResult:
    """
    Least-squares fit of log(value) = slope * x + intercept.

    Args:
        eps: abscissae, positive
        values: measured values, positive
        model: pure_power uses x = log(eps); power_with_log uses
            x = log(eps ln(1 + mu T / eps^2) / sqrt(mu))
        mu: shallowness parameter of the log model
        t_end: final time of the log model

    Returns:
        FitResult with the slope, the intercept and the rms residual in log space

    Raises:
        FitError: fewer than 3 points, nonpositive values or no spread in x
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.size != values.size:
        raise FitError("eps and values differ in length")
    if eps.size < 3:
        raise FitError(f"a rate fit needs at least 3 points, got {eps.size}")
    if np.any(~np.isfinite(values)) or np.any(values <= 0) or np.any(eps <= 0):
        raise FitError("rate fits need positive finite values")
    x = np.log(eps) if model == "pure_power" else _log_abscissa(eps, mu, t_end)
    if np.ptp(x) < 1e-12:
        raise FitError("abscissae have no spread")
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return FitResult(slope=float(slope), intercept=float(intercept), residual=residual)


# ---------------------------------------------------------------------------
# reports


class FitRecord(BaseModel):
    norm_id: str
    norm_kind: str
    comparison: str
    q: str
    r: str
    mu: Optional[float] = None
    mu_power: Optional[float] = None
    fit_model: str
    eps: List[float]
    values: List[float]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    residual: Optional[float] = None
    target: Optional[float] = None
    target_rule: Optional[str] = None
    verdict: Literal["PASS", "FLAG", "FAIL", "INFO", "NO_FIT"]
    note: str = ""


class UniformityRecord(BaseModel):
    norm_id: str
    slopes: Dict[str, float]
    spread: float
    tolerance: float
    verdict: Literal["PASS", "FAIL"]


class RateReport(BaseModel):
    theorem_tag: str
    model: str
    tolerance: float
    classification: Optional[Dict[str, Any]] = None
    fits: List[FitRecord] = Field(default_factory=list)
    uniformity: List[UniformityRecord] = Field(default_factory=list)
    failed_cells: int = 0

    @property
    def has_failures(self) -> bool:
        if self.failed_cells:
            return True
        return any(f.verdict == "FAIL" for f in self.fits) or any(
            u.verdict == "FAIL" for u in self.uniformity
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


def resolve_target(
    target: Optional[Union[float, str]], cls: Optional[PhaseClassification]
) -> Tuple[Optional[float], Optional[str]]:
    """Turn a target given as a number, a fraction string or a phase rule into a number."""
    if target is None:
        return None, None
    if isinstance(target, (int, float)):
        return float(target), None
    rule = target.strip()
    if rule in TARGET_RULES:
        if cls is None:
            raise ConfigError(f"target rule {rule!r} needs an abcd model")
        values = {
            "1/(2p)": 1.0 / (2 * cls.p),
            "1/(2p0)": 1.0 / (2 * cls.p0),
            "1/(2p2d)": 1.0 / (2 * max(cls.p0, 2)),
            "sigma/2": cls.sigma / 2,
            "sigma2d/2": cls.sigma_2d / 2,
            "tilde_sigma/2": None if cls.tilde_sigma is None else cls.tilde_sigma / 2,
        }
        return values[rule], rule
    try:
        return float(Fraction(rule)), None
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read target {target!r}") from exc


def _verdict(slope: float, target: float, tolerance: float, floor: Optional[float]) -> str:
    if slope >= target - tolerance:
        return "PASS"
    if floor is not None and slope >= floor - tolerance:
        return "FLAG"
    return "FAIL"


def _phase_for(spec: ExperimentSpec) -> Optional[PhaseClassification]:
    model = spec.model
    if model.kind == ModelKind.ABCD or any(isinstance(n.target, str) and n.target.strip() in TARGET_RULES for n in spec.norms):
        return classify(model.abcd)
    return None


def compute_report(spec: ExperimentSpec, rows: Sequence[RawRow]) -> RateReport:
    """Fit every norm request of ``spec`` against the raw rows and assign verdicts."""
    cls = _phase_for(spec)
    report = RateReport(
        theorem_tag=spec.tag,
        model=spec.model.label,
        tolerance=spec.tolerance,
        classification=cls.summary() if cls else None,
        failed_cells=len({(r.eps, r.mu) for r in rows if r.run_status != "ok"}),
    )
    for request in spec.norms:
        matching = [
            r
            for r in rows
            if (r.norm_kind, r.comparison, r.q, r.r) == request.measurement_key and r.run_status == "ok"
        ]
        target, rule = resolve_target(request.target, cls)
        note = ""
        if request.target is not None and target is None:
            note = f"target rule {rule} does not apply to this phase"
        if target is not None and request.plus_inverse_q and request.kind == "mixed":
            target += 0.0 if math.isinf(request.q) else 1.0 / request.q
        floor = request.sigma_floor
        if floor is None and rule in SIGMA_RULES:
            floor = SIGMA_FLOOR

        slopes: Dict[str, float] = {}
        mu_slices = request.mu_values if request.mu_values is not None else spec.mu_list
        for mu in mu_slices:
            cell = sorted((r for r in matching if math.isclose(r.mu, mu)), key=lambda r: -r.eps)
            eps = [r.eps for r in cell]
            values = [r.value for r in cell]
            record = dict(
                norm_id=request.norm_id,
                norm_kind=request.norm_kind,
                comparison=request.comparison,
                q=fmt_exponent(request.q),
                r=fmt_exponent(request.r),
                mu=mu,
                fit_model=request.fit_model,
                eps=eps,
                values=values,
                target=target,
                target_rule=rule,
            )
            try:
                fit = fit_rate(eps, values, request.fit_model, mu, spec.t_end)
            except FitError as exc:
                report.fits.append(FitRecord(**record, verdict="NO_FIT", note=str(exc)))
                continue
            slopes[repr(mu)] = fit.slope
            verdict = "INFO" if target is None else _verdict(fit.slope, target, spec.tolerance, floor)
            report.fits.append(
                FitRecord(
                    **record,
                    slope=fit.slope,
                    intercept=fit.intercept,
                    residual=fit.residual,
                    verdict=verdict,
                    note=note,
                )
            )

        if request.mu_uniform and len(slopes) >= 2:
            spread = max(slopes.values()) - min(slopes.values())
            report.uniformity.append(
                UniformityRecord(
                    norm_id=request.norm_id,
                    slopes=slopes,
                    spread=spread,
                    tolerance=spec.uniformity_tolerance,
                    verdict="PASS" if spread <= spec.uniformity_tolerance else "FAIL",
                )
            )

        if request.mu_power is not None and len(spec.mu_list) >= 2:
            pooled = sorted(matching, key=lambda r: r.eps / r.mu**request.mu_power)
            x = [r.eps / r.mu**request.mu_power for r in pooled]
            values = [r.value for r in pooled]
            try:
                fit = fit_rate(x, values)
                report.fits.append(
                    FitRecord(
                        norm_id=request.norm_id,
                        norm_kind=request.norm_kind,
                        comparison=request.comparison,
                        q=fmt_exponent(request.q),
                        r=fmt_exponent(request.r),
                        mu_power=request.mu_power,
                        fit_model="pure_power",
                        eps=x,
                        values=values,
                        slope=fit.slope,
                        intercept=fit.intercept,
                        residual=fit.residual,
                        target=target,
                        target_rule=rule,
                        verdict="INFO",
                        note=f"pooled fit against eps/mu^{request.mu_power:g}",
                    )
                )
            except FitError as exc:
                logger.warning("pooled ratio fit for %s skipped: %s", request.norm_id, exc)
    return report


def write_csv(rows: Sequence[RawRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_record())


def read_csv(path: Union[str, Path]) -> List[RawRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"{path} does not have the results.csv columns")
        return [
            RawRow(**{**rec, "eps": float(rec["eps"]), "mu": float(rec["mu"]), "value": float(rec["value"])})
            for rec in reader
        ]


def _plot(report: RateReport, norm_id: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "rigidlid"
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for fit in report.fits:
        if fit.norm_id != norm_id or fit.mu is None or not fit.eps:
            continue
        eps = np.array(fit.eps)
        ax.loglog(eps, fit.values, "o", label=f"mu={fit.mu:g}")
        if fit.slope is not None and fit.fit_model == "pure_power":
            ax.loglog(eps, np.exp(fit.intercept) * eps**fit.slope, "-", label=f"fit {fit.slope:.3f}")
        if fit.target is not None and fit.fit_model == "pure_power":
            anchor = fit.values[0] / fit.eps[0] ** fit.target
            ax.loglog(eps, anchor * eps**fit.target, "--", color="gray", label=f"target {fit.target:.3f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("value")
    ax.set_title(f"{report.theorem_tag}: {norm_id}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_report(
    rows: Sequence[RawRow],
    report: Optional[RateReport],
    out_dir: Union[str, Path],
    spec: Optional[ExperimentSpec] = None,
) -> List[Path]:
    """
    Write results.csv, report.json and one SVG per (theorem tag, norm).

    With fewer than 3 distinct eps values only the raw CSV is written.

    Returns:
        the paths written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if spec is not None:
        path = out_dir / "resolved_config.json"
        path.write_text(spec.model_dump_json(indent=2))
        written.append(path)
    path = out_dir / "results.csv"
    write_csv(rows, path)
    written.append(path)
    if report is None or len({r.eps for r in rows}) < 3:
        logger.warning("fewer than 3 sweep points: raw results only")
        return written
    path = out_dir / "report.json"
    path.write_text(report.to_json())
    written.append(path)
    for norm_id in sorted({f.norm_id for f in report.fits}):
        path = out_dir / f"{report.theorem_tag}_{norm_id}.svg"
        _plot(report, norm_id, path)
        written.append(path)
    return written


def rerender(out_dir: Union[str, Path]) -> List[Path]:
    """Rebuild report.json and the plots from results.csv and resolved_config.json."""
    out_dir = Path(out_dir)
    csv_path = out_dir / "results.csv"
    if not csv_path.exists():
        raise ConfigError(f"{out_dir} holds no results.csv")
    rows = read_csv(csv_path)
    spec_path = out_dir / "resolved_config.json"
    if not spec_path.exists():
        raise ConfigError(f"{out_dir} holds no resolved_config.json")
    spec = ExperimentSpec.model_validate_json(spec_path.read_text())
    return render_report(rows, compute_report(spec, rows), out_dir)


# ---------------------------------------------------------------------------
# theorem presets


def available_suites() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def parse_override(text: str) -> Tuple[str, Any]:
    """``key.sub=value`` with a JSON value, or a bare string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def theorem_suite(
    tag: str,
    smoke: bool = False,
    overrides: Optional[Sequence[Union[str, Tuple[str, Any]]]] = None,
) -> ExperimentSpec:
    """
    Load the preset of a theorem suite.

    Args:
        tag: preset name, e.g. ``thm2.1``
        smoke: apply the preset's reduced-scale ``smoke`` block
        overrides: ``key=value`` strings or (key, value) pairs with dotted keys

    Returns:
        ExperimentSpec with targets from phase rules left as rule strings

    Raises:
        ConfigError: unknown tag or invalid preset after overrides
    """
    path = PRESET_DIR / f"{tag.lower()}.json"
    if not path.exists():
        raise ConfigError(f"unknown theorem suite {tag!r}; available: {', '.join(available_suites())}")
    data = json.loads(path.read_text())
    smoke_block = data.pop("smoke", {})
    if smoke:
        for key, value in smoke_block.items():
            _set_dotted(data, key, value)
    for item in overrides or []:
        key, value = parse_override(item) if isinstance(item, str) else item
        _set_dotted(data, key, value)
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"suite {tag}: {exc}") from exc


def run_suite(
    tag: str,
    out_dir: Union[str, Path],
    smoke: bool = False,
    overrides: Optional[Sequence[str]] = None,
    jobs: Optional[int] = None,
) -> RateReport:
    """Load, run, fit and render a theorem suite."""
    spec = theorem_suite(tag, smoke, overrides)
    rows = run_sweep(spec, jobs)
    report = compute_report(spec, rows)
    render_report(rows, report, out_dir, spec)
    return report
