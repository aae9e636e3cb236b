"""Tests for rate fitting, verdicts, sweeps, report rendering and theorem presets."""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from rigidlid.errors import ConfigError, FitError
from rigidlid.models import AbcdParams, ModelKind, ModelSpec
from rigidlid.phase import classify
from rigidlid.ratelab import (
    ExperimentSpec,
    NormRequest,
    RawRow,
    available_suites,
    compute_report,
    fit_rate,
    fmt_exponent,
    parse_override,
    read_csv,
    render_report,
    rerender,
    resolve_target,
    run_sweep,
    theorem_suite,
)
from rigidlid.solver import InitialData
from rigidlid.spectra import Grid

EPS = [0.5, 0.25, 0.125, 0.0625]


def _spec(norms, model=None, mu_list=(1.0,), eps_list=EPS, **kwargs):
    return ExperimentSpec(
        tag="demo",
        model=model or ModelSpec(kind=ModelKind.CLASSICAL, dim=1),
        eps_list=list(eps_list),
        mu_list=list(mu_list),
        grid=Grid(dim=1, modes_per_axis=64, length_per_axis=32.0),
        t_end=0.1,
        norms=norms,
        **kwargs,
    )


def _rows(request, values, mu=1.0, status="ok"):
    """Synthetic raw rows for one norm request: ``values`` maps eps to the measured value."""
    return [
        RawRow(
            theorem_tag="demo",
            model="classical1d",
            eps=eps,
            mu=mu,
            q=fmt_exponent(request.q),
            r=fmt_exponent(request.r),
            norm_kind=request.norm_kind,
            comparison=request.comparison,
            value=value,
            run_status=status,
        )
        for eps, value in values.items()
    ]


def _power(rate, scale=1.0, eps=EPS):
    return {e: scale * e**rate for e in eps}


class TestFitRate:
    def test_exact_power_law(self):
        eps = np.array(EPS)
        fit = fit_rate(eps, 3.0 * eps**0.25)
        assert fit.slope == pytest.approx(0.25, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
        assert fit.residual < 1e-12

    def test_power_with_log(self):
        eps = np.array(EPS)
        mu, t_end = 0.5, 2.0
        x = eps * np.log1p(mu * t_end / eps**2) / np.sqrt(mu)
        fit = fit_rate(eps, 2.0 * x**0.5, model="power_with_log", mu=mu, t_end=t_end)
        assert fit.slope == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize(
        "eps, values, message",
        [
            ([0.5, 0.25], [1.0, 0.5], "at least 3"),
            ([0.5, 0.25, 0.125], [1.0, 0.0, 0.5], "positive"),
            ([0.5, 0.25, 0.125], [1.0, math.nan, 0.5], "positive"),
            ([0.5, 0.25, 0.125], [1.0, 0.5], "differ in length"),
            ([0.1, 0.1, 0.1], [1.0, 0.5, 0.25], "no spread"),
        ],
    )
    def test_unfittable(self, eps, values, message):
        with pytest.raises(FitError, match=message):
            fit_rate(eps, values)


class TestExperimentSpec:
    def test_eps_sorted_decreasing(self):
        spec = _spec([], eps_list=[0.125, 0.5, 0.25])
        assert spec.eps_list == [0.5, 0.25, 0.125]

    def test_duplicate_eps(self):
        with pytest.raises(ValidationError, match="duplicates"):
            _spec([], eps_list=[0.5, 0.5, 0.25])

    def test_eps_range(self):
        with pytest.raises(ValidationError, match=r"\(0, 1\]"):
            _spec([], eps_list=[2.0, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="grid is 1D"):
            _spec([], model=ModelSpec(kind=ModelKind.CLASSICAL, dim=2))

    def test_measurements_deduplicated(self):
        first = NormRequest(q="inf", r=2, target="1/4")
        second = NormRequest(q=math.inf, r=2.0, target=0.5, plus_inverse_q=True)
        spec = _spec([first, second, NormRequest(kind="morawetz", comparison="zero")])
        assert len(spec.measurements()) == 2

    def test_euler_comparison_is_rotational(self):
        with pytest.raises(ValidationError, match="rotational"):
            NormRequest(comparison="euler_rotational", components="all")

    def test_mixed_exponents_checked(self):
        with pytest.raises(ValidationError):
            NormRequest(q=1.0, r=2.0)

    def test_norm_ids(self):
        assert NormRequest(q="inf", r=2).norm_id == "mixed-all-semigroup_corrector-qinf-r2"
        assert NormRequest(kind="morawetz", comparison="zero").norm_id == "morawetz-all-zero"


class TestResolveTarget:
    def test_plain_values(self):
        assert resolve_target(None, None) == (None, None)
        assert resolve_target(0.25, None) == (0.25, None)
        assert resolve_target("1/6", None) == (pytest.approx(1.0 / 6.0), None)

    def test_phase_rules(self):
        cls = classify(AbcdParams.classical())
        assert resolve_target("1/(2p)", cls) == (pytest.approx(1.0 / 6.0), "1/(2p)")
        assert resolve_target("1/(2p0)", cls)[0] == pytest.approx(0.5)
        assert resolve_target("1/(2p2d)", cls)[0] == pytest.approx(0.25)
        assert resolve_target("sigma/2", cls)[0] == pytest.approx(0.5)
        assert resolve_target("tilde_sigma/2", cls)[0] == pytest.approx(0.25)

    def test_rule_without_phase(self):
        with pytest.raises(ConfigError, match="needs an abcd model"):
            resolve_target("sigma/2", None)

    def test_unreadable(self):
        with pytest.raises(ConfigError, match="cannot read"):
            resolve_target("one quarter", None)


class TestComputeReport:
    def test_pass(self):
        request = NormRequest(q="inf", r=2, target=0.25)
        report = compute_report(_spec([request]), _rows(request, _power(0.3, 2.0)))
        (fit,) = report.fits
        assert fit.verdict == "PASS"
        assert fit.slope == pytest.approx(0.3, abs=1e-10)
        assert not report.has_failures

    def test_fail(self):
        request = NormRequest(q="inf", r=2, target=0.25)
        report = compute_report(_spec([request]), _rows(request, _power(0.1)))
        assert report.fits[0].verdict == "FAIL"
        assert report.has_failures

    def test_sigma_rule_flags_below_target(self):
        """sigma/2 = 1/2 for the classical phase; slopes above the 1/4 floor are flagged, not failed."""
        request = NormRequest(kind="morawetz", comparison="zero", target="sigma/2")
        model = ModelSpec(kind=ModelKind.ABCD, dim=1, abcd=AbcdParams.classical())
        report = compute_report(_spec([request], model=model), _rows(request, _power(0.3)))
        (fit,) = report.fits
        assert fit.target == pytest.approx(0.5)
        assert fit.target_rule == "sigma/2"
        assert fit.verdict == "FLAG"
        assert report.classification["p"] == 3
        assert not report.has_failures

    def test_plus_inverse_q(self):
        request = NormRequest(q=4, r="inf", target="1/4", plus_inverse_q=True)
        report = compute_report(_spec([request]), _rows(request, _power(0.5)))
        assert report.fits[0].target == pytest.approx(0.5)
        assert report.fits[0].verdict == "PASS"

    def test_no_target_is_info(self):
        request = NormRequest(q=2, r=2)
        report = compute_report(_spec([request]), _rows(request, _power(0.7)))
        assert report.fits[0].verdict == "INFO"
        assert not report.has_failures

    def test_too_few_points(self):
        request = NormRequest(q=2, r=2, target=0.5)
        report = compute_report(_spec([request]), _rows(request, _power(0.5, eps=EPS[:2])))
        assert report.fits[0].verdict == "NO_FIT"
        assert "at least 3" in report.fits[0].note
        assert not report.has_failures

    def test_failed_cells(self):
        request = NormRequest(q=2, r=2, target=0.5)
        rows = _rows(request, _power(0.6, eps=EPS[:3]))
        rows += _rows(request, {EPS[3]: math.nan}, status="DepthFloorViolation: depth floor violated")
        report = compute_report(_spec([request]), rows)
        assert report.failed_cells == 1
        assert report.fits[0].verdict == "PASS"
        assert report.fits[0].eps == EPS[:3]
        assert report.has_failures

    @pytest.mark.parametrize("second_rate, verdict", [(0.32, "PASS"), (0.5, "FAIL")])
    def test_uniformity_in_mu(self, second_rate, verdict):
        request = NormRequest(kind="morawetz", comparison="zero", mu_uniform=True)
        rows = _rows(request, _power(0.3), mu=1.0) + _rows(request, _power(second_rate), mu=0.1)
        report = compute_report(_spec([request], mu_list=(1.0, 0.1)), rows)
        (uniformity,) = report.uniformity
        assert uniformity.verdict == verdict
        assert uniformity.spread == pytest.approx(second_rate - 0.3, abs=1e-9)

    def test_pooled_ratio_fit(self):
        request = NormRequest(q=2, r=2, mu_values=[1.0], mu_power=1.0)
        rows = _rows(request, _power(0.5), mu=1.0) + _rows(request, {e: (e / 0.5) ** 0.5 for e in EPS}, mu=0.5)
        report = compute_report(_spec([request], mu_list=(1.0, 0.5)), rows)
        pooled = [f for f in report.fits if f.mu_power is not None]
        assert len(pooled) == 1
        assert pooled[0].verdict == "INFO"
        assert pooled[0].slope == pytest.approx(0.5, abs=1e-9)

    def test_report_json_is_sorted(self):
        request = NormRequest(q=2, r=2, target=0.5)
        report = compute_report(_spec([request]), _rows(request, _power(0.5)))
        data = json.loads(report.to_json())
        assert list(data) == sorted(data)


class TestSweep:
    @pytest.fixture
    def norms(self):
        return [NormRequest(q="inf", r=2), NormRequest(kind="morawetz", comparison="zero")]

    def test_small_sweep_ignores_eps_order(self, norms):
        a = run_sweep(_spec(norms, eps_list=[0.5, 0.25, 0.125]), jobs=1)
        b = run_sweep(_spec(norms, eps_list=[0.125, 0.5, 0.25]), jobs=1)
        assert len(a) == 6
        assert [r.model_dump() for r in a] == [r.model_dump() for r in b]
        assert [r.eps for r in a[::2]] == [0.5, 0.25, 0.125]
        assert all(r.run_status == "ok" and r.value > 0 for r in a)

    def test_euler_rotational_at_initial_time(self):
        """At t = 0 the rotational velocity equals the Biot-Savart velocity of curl V0."""
        spec = ExperimentSpec(
            tag="euler",
            model=ModelSpec(kind=ModelKind.CLASSICAL, dim=2),
            eps_list=[0.5],
            grid=Grid(dim=2, modes_per_axis=32, length_per_axis=20.0),
            initial=InitialData(rotational_amplitude=1.0, width=1.5),
            t_end=0.0,
            norms=[NormRequest(comparison="euler_rotational", components="rotational", q="inf", r=2)],
        )
        (row,) = run_sweep(spec, jobs=1)
        assert row.run_status == "ok"
        assert row.value <= 1e-12

    def test_euler_needs_two_dimensions(self):
        spec = _spec([NormRequest(comparison="euler_rotational", components="rotational")])
        with pytest.raises(ConfigError, match="2D grid"):
            run_sweep(spec, jobs=1)


class TestRender:
    def test_rerender_reproduces_report(self, tmp_path):
        request = NormRequest(q="inf", r=2, target="1/4", plus_inverse_q=True)
        spec = _spec([request, NormRequest(kind="morawetz", comparison="zero")])
        rows = _rows(request, _power(0.3)) + _rows(spec.norms[1], _power(0.5))
        written = render_report(rows, compute_report(spec, rows), tmp_path, spec)
        names = {p.name for p in written}
        assert {"resolved_config.json", "results.csv", "report.json"} <= names
        assert any(name.endswith(".svg") for name in names)

        original = (tmp_path / "report.json").read_text()
        assert [r.model_dump() for r in read_csv(tmp_path / "results.csv")] == [r.model_dump() for r in rows]
        rerender(tmp_path)
        assert (tmp_path / "report.json").read_text() == original

    def test_two_eps_values_write_raw_only(self, tmp_path):
        request = NormRequest(q=2, r=2)
        rows = _rows(request, _power(0.5, eps=EPS[:2]))
        spec = _spec([request])
        render_report(rows, compute_report(spec, rows), tmp_path, spec)
        assert (tmp_path / "results.csv").exists()
        assert not (tmp_path / "report.json").exists()

    def test_rerender_needs_results(self, tmp_path):
        with pytest.raises(ConfigError, match="no results.csv"):
            rerender(tmp_path)

    def test_foreign_csv(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError, match="columns"):
            read_csv(path)


class TestTheoremSuites:
    def test_unknown_tag(self):
        with pytest.raises(ConfigError, match="unknown theorem suite"):
            theorem_suite("thm9.9")

    @pytest.mark.parametrize("tag", available_suites())
    @pytest.mark.parametrize("smoke", [False, True])
    def test_presets_load(self, tag, smoke):
        spec = theorem_suite(tag, smoke=smoke)
        assert spec.tag == tag
        assert spec.norms
        assert len(spec.eps_list) >= 3

    def test_smoke_block(self):
        full = theorem_suite("thm2.1")
        smoke = theorem_suite("thm2.1", smoke=True)
        assert full.grid.modes_per_axis == 4096
        assert smoke.grid.modes_per_axis == 256
        assert smoke.mu_list == [1.0]
        assert smoke.eps_list == [0.125, 0.0625, 0.03125]

    def test_overrides(self):
        spec = theorem_suite("thm2.1", smoke=True, overrides=["t_end=0.25", ("grid.modes_per_axis", 128)])
        assert spec.t_end == 0.25
        assert spec.grid.modes_per_axis == 128

    def test_invalid_override(self):
        with pytest.raises(ConfigError, match="thm2.1"):
            theorem_suite("thm2.1", overrides=["eps_list=[2.0]"])

    def test_parse_override(self):
        assert parse_override("solver.c1=0.02") == ("solver.c1", 0.02)
        assert parse_override("model.kind=abcd") == ("model.kind", "abcd")
        with pytest.raises(ConfigError, match="key=value"):
            parse_override("t_end")
