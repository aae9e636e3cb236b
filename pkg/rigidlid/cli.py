"""
Command-line frontend.

    python -m rigidlid simulate --config run.json --out results/run
    python -m rigidlid suite thm2.1 --smoke --jobs 4 --set t_end=0.5
    python -m rigidlid phase --abcd -0.1667 0.5 -0.3333 0 --probe
    python -m rigidlid report results/thm2.1

Exit codes: 0 success, 1 configuration error, 2 solver abort,
3 sweep finished with failed cells or failing verdicts.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import Field, ValidationError, model_validator

from .config import settings
from .errors import ConfigError, RigidLidError, SolverAbort
from .models import AbcdParams, ModelSpec
from .models.base import BaseModel
from .phase import classify, kernel_decay_probe
from .ratelab import RateReport, available_suites, rerender, run_suite
from .solver import TIME_TOL, InitialData, SolverConfig, run, save_trajectory
from .spectra import Grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_PARTIAL = 3

PROBES = (
    ("low", {"weight_exponent": 0.5}),
    ("full", {"bessel_power": -5.0 / 6.0}),
    ("high", {}),
)


class SimulateConfig(BaseModel):
    """Configuration file of a single run; unknown keys are rejected."""

    model: ModelSpec
    grid: Grid
    initial: InitialData = Field(default_factory=InitialData)
    t_end: float = Field(..., ge=0.0)
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @model_validator(mode="after")
    def _consistent(self) -> "SimulateConfig":
        if self.model.dim != self.grid.dim:
            raise ValueError(f"model.dim = {self.model.dim} does not match grid.dim = {self.grid.dim}")
        times = self.solver.snapshot_times or []
        if times and max(times) > self.t_end + TIME_TOL:
            raise ValueError(f"solver.snapshot_times reach {max(times)}, beyond t_end = {self.t_end}")
        return self


def load_config(path: str) -> SimulateConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: missing file, malformed JSON (with line and column) or schema violation
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return SimulateConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _out_dir(out: Optional[str], name: str) -> Path:
    return Path(out) if out else Path(settings.RIGIDLID_OUT) / name


def cmd_simulate(config_path: str, out: Optional[str] = None) -> int:
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        print(f"❌ {exc}")
        return EXIT_CONFIG

    out_dir = _out_dir(out, "simulate")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(config.model_dump_json(indent=2))

    spec = config.model
    print(f"🚀 {spec.label} eps={spec.eps:g} mu={spec.mu:g} on {config.grid.shape} modes up to T={config.t_end:g}")
    try:
        U0 = config.initial.build(config.grid)
        traj = run(spec, U0, config.t_end, config.solver)
    except SolverAbort as exc:
        print(f"❌ run aborted: {exc}")
        return EXIT_ABORT
    except RigidLidError as exc:
        print(f"❌ {exc}")
        return EXIT_CONFIG

    save_trajectory(traj, out_dir / "trajectory")
    print(f"✅ {len(traj.snapshots)} snapshots written to {out_dir / 'trajectory'} (M = {traj.bound_m:.4g})")
    return EXIT_OK


def _print_report(report: RateReport) -> None:
    marks = {"PASS": "✅", "FLAG": "⚠️ ", "FAIL": "❌", "INFO": "ℹ️ ", "NO_FIT": "⚠️ "}
    for fit in report.fits:
        slope = "   -  " if fit.slope is None else f"{fit.slope:6.3f}"
        target = "  -  " if fit.target is None else f"{fit.target:.3f}"
        where = f"mu={fit.mu:g}" if fit.mu is not None else f"eps/mu^{fit.mu_power:g}"
        print(f"{marks[fit.verdict]} {fit.norm_id:<48} {where:<14} slope {slope}  target {target}  {fit.verdict}")
    for record in report.uniformity:
        print(f"{marks[record.verdict]} {record.norm_id:<48} mu spread {record.spread:.3f} (<= {record.tolerance:g})")
    if report.failed_cells:
        print(f"⚠️  {report.failed_cells} cell(s) aborted, see run_status in results.csv")


def cmd_suite(
    tag: str,
    overrides: Sequence[str] = (),
    out: Optional[str] = None,
    smoke: bool = False,
    jobs: Optional[int] = None,
    seed: Optional[int] = None,
) -> int:
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"initial.seed={seed}")
    out_dir = _out_dir(out, tag)
    print(f"🚀 suite {tag}{' (smoke)' if smoke else ''} -> {out_dir}")
    try:
        report = run_suite(tag, out_dir, smoke=smoke, overrides=overrides, jobs=jobs)
    except SolverAbort as exc:
        print(f"❌ reference run aborted: {exc}")
        return EXIT_ABORT
    except RigidLidError as exc:
        print(f"❌ {exc}")
        return EXIT_CONFIG

    _print_report(report)
    if report.has_failures:
        print(f"⚠️  suite {tag} finished with failures; report written to {out_dir}")
        return EXIT_PARTIAL
    print(f"✅ suite {tag} passed; report written to {out_dir}")
    return EXIT_OK


def cmd_phase(abcd: Sequence[float], out: Optional[str] = None, probe: bool = False) -> int:
    try:
        params = AbcdParams(a=abcd[0], b=abcd[1], c=abcd[2], d=abcd[3])
        cls = classify(params)
    except (RigidLidError, ValidationError) as exc:
        print(f"❌ {exc}")
        return EXIT_CONFIG

    print(f"📐 abcd = {params.coefficients}")
    print(f"   p={cls.p}  p0={cls.p0}  alpha={cls.alpha}  ell={cls.ell:g}")
    print(f"   sum_zero={cls.sum_zero}  m_max={cls.m_max}  sigma={cls.sigma:.4f}  sigma_2d={cls.sigma_2d:.4f}")
    if cls.alpha_excluded:
        print(f"⚠️  alpha = {cls.alpha} lies outside the range of the high-frequency decay estimates")
    record = {"classification": cls.summary()}

    if probe:
        probes = []
        for band, options in PROBES:
            try:
                result = kernel_decay_probe(params, 1.0, band=band, **options)
            except RigidLidError as exc:
                print(f"⚠️  probe {band} skipped: {exc}")
                continue
            probes.append(result)
            predicted = "-" if result.predicted is None else f"{result.predicted:.3f}"
            print(
                f"   probe {result.band:<5} theta={result.theta:.3f} "
                f"[{result.theta_low:.3f}, {result.theta_high:.3f}] predicted {predicted} {result.note}"
            )
        record["probes"] = [result.model_dump(mode="json") for result in probes]

    out_dir = _out_dir(out, "phase")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "phase.json").write_text(json.dumps(record, sort_keys=True, indent=2))
    print(f"✅ classification written to {out_dir / 'phase.json'}")
    return EXIT_OK


def cmd_report(raw_dir: str) -> int:
    try:
        written = rerender(raw_dir)
    except RigidLidError as exc:
        print(f"❌ {exc}")
        return EXIT_CONFIG
    print(f"✅ {len(written)} file(s) rendered in {raw_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigidlid", description="Rigid-lid convergence laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one simulation from a JSON config")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out")

    suite = sub.add_parser("suite", help="run a theorem suite")
    suite.add_argument("tag", help=f"one of {', '.join(available_suites())}")
    suite.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    suite.add_argument("--smoke", action="store_true", help="reduced-scale preset")
    suite.add_argument("--jobs", type=int, default=None)
    suite.add_argument("--seed", type=int, default=None)
    suite.add_argument("--out")

    phase = sub.add_parser("phase", help="classify an abcd dispersion phase")
    phase.add_argument("--abcd", nargs=4, type=float, required=True, metavar=("A", "B", "C", "D"))
    phase.add_argument("--probe", action="store_true", help="also run kernel decay probes")
    phase.add_argument("--out")

    report = sub.add_parser("report", help="re-render a report from results.csv")
    report.add_argument("raw_dir")
    return parser


def configure_logging() -> None:
    level = logging.DEBUG if settings.DEBUG else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out)
    if args.command == "suite":
        return cmd_suite(args.tag, args.overrides, args.out, args.smoke, args.jobs, args.seed)
    if args.command == "phase":
        return cmd_phase(args.abcd, args.out, args.probe)
    return cmd_report(args.raw_dir)


if __name__ == "__main__":
    sys.exit(main())
