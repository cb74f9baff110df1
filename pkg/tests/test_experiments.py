"""Tests for the rate-study machinery: scenarios, slopes, caching, outputs.

Hand oracle for the log-log regression, used by test_loglog_slope_noisy.
Take n = (10, 100, 1000) and mean log errors y = (0, -1, -1.5), so the
regressors are x = (L, 2L, 3L) with L = ln 10.  Then xbar = 2L and
ybar = -5/6, the centered products give Sxy = -(3/2) L and Sxx = 2 L^2,
hence

    slope     = -(3/2) L / (2 L^2) = -3 / (4 L)
    intercept = -5/6 + (3 / (4 L)) * 2L = 2/3
    residuals = (1/12, -1/6, 1/12),  SSR = 1/24
    std error = sqrt((1/24) / (1 * 2 L^2)) = 1 / (L * sqrt(48)).

Preset truths pinned below use sample sizes that make the power laws
exact in binary arithmetic: 256**0.25 = 4, 256**0.375 = 8, 256**0.125 = 2,
100**0.5 = 10.
"""

import json
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from deviate import (
    DEFAULT_N_GRID,
    EmConfig,
    RateStudyReport,
    ScenarioSpec,
    emit_plots,
    fit_loglog_slope,
    preset_names,
    preset_scenario,
    resolve_em_config,
    run_density_rate_study,
    run_rate_study,
    run_study_cell,
    study_hash,
)


def tiny_scenario(seed=7, **overrides):
    payload = dict(n_grid=(40, 90), n_reps=3, seed=seed)
    payload.update(overrides)
    return preset_scenario("case-i", **payload)


def test_loglog_slope_exact_power_law():
    n = [100, 400, 1600, 6400]
    errs = 3.0 * np.asarray(n, dtype=float) ** -0.5
    fit = fit_loglog_slope(n, np.log(errs))
    assert fit["slope"] == pytest.approx(-0.5, abs=1e-12)
    assert fit["intercept"] == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit["std_error"] == pytest.approx(0.0, abs=1e-12)


def test_loglog_slope_flat():
    fit = fit_loglog_slope([10, 100, 1000], [-2.0, -2.0, -2.0])
    assert fit["slope"] == pytest.approx(0.0, abs=1e-14)
    assert fit["intercept"] == pytest.approx(-2.0, abs=1e-14)
    assert fit["std_error"] == pytest.approx(0.0, abs=1e-14)


def test_loglog_slope_noisy():
    L = math.log(10.0)
    fit = fit_loglog_slope([10, 100, 1000], [0.0, -1.0, -1.5])
    assert fit["slope"] == pytest.approx(-3.0 / (4.0 * L), abs=1e-13)
    assert fit["intercept"] == pytest.approx(2.0 / 3.0, abs=1e-13)
    assert fit["std_error"] == pytest.approx(1.0 / (L * math.sqrt(48.0)), abs=1e-13)


def test_loglog_slope_two_points_has_zero_std_error():
    fit = fit_loglog_slope([100, 1000], [-1.0, -2.0])
    assert fit["slope"] == pytest.approx(-1.0 / math.log(10.0), abs=1e-13)
    assert fit["std_error"] == 0.0


def test_loglog_slope_input_validation():
    with pytest.raises(ValueError):
        fit_loglog_slope([100], [-1.0])
    with pytest.raises(ValueError):
        fit_loglog_slope([100, 1000], [-1.0, -2.0, -3.0])
    with pytest.raises(ValueError, match="constant"):
        fit_loglog_slope([100, 100], [-1.0, -2.0])


def test_scenario_rejects_vanishing_weight():
    with pytest.raises(ValueError, match="deviate"):
        tiny_scenario(weight_rule={"kind": "constant", "value": 0.0})
    with pytest.raises(ValueError, match="deviate"):
        tiny_scenario(weight_rule={"kind": "constant", "value": 1.5})
    with pytest.raises(ValueError, match="deviate"):
        tiny_scenario(
            weight_rule={"kind": "power", "offset": -0.05, "coef": 0.5, "exponent": -0.25},
            n_grid=(100, 100000),
        )


def test_scenario_rejects_bad_grids():
    with pytest.raises(ValueError, match="two distinct"):
        tiny_scenario(n_grid=(100,))
    with pytest.raises(ValueError, match="two distinct"):
        tiny_scenario(n_grid=(100, 100))
    with pytest.raises(ValueError, match="below 10"):
        tiny_scenario(n_grid=(5, 100))
    with pytest.raises(ValueError, match="n_reps"):
        tiny_scenario(n_reps=0)


def test_scenario_rule_and_density_validation():
    spec = tiny_scenario()
    with pytest.raises(ValueError, match="rule kind"):
        replace(spec, mu_rule={"kind": "sinusoid"}).truth(100)
    with pytest.raises(ValueError, match="power_std"):
        replace(spec, mu_rule={"kind": "power_std", "coef": 1.0, "exponent": -0.5}).truth(100)
    with pytest.raises(ValueError, match="reference density"):
        replace(spec, h0={"kind": "laplace"}).build_model()
    with pytest.raises(ValueError, match="bump family"):
        replace(spec, bump={"kind": "laplace"}).build_model()


def test_scenario_dict_round_trip():
    spec = tiny_scenario()
    clone = ScenarioSpec.from_dict(spec.to_dict())
    assert clone == spec
    payload = spec.to_dict()
    payload["n_grid"] = list(payload["n_grid"])
    assert ScenarioSpec.from_dict(payload) == spec
    payload["volume"] = 11
    with pytest.raises(ValueError, match="unknown scenario fields"):
        ScenarioSpec.from_dict(payload)


def test_preset_registry():
    names = preset_names()
    assert names == sorted(names)
    assert set(names) == {
        "case-i",
        "case-ii",
        "case-iii",
        "case-iv",
        "nondist-mu-drift",
        "nondist-sigma-drift",
    }
    for name in names:
        spec = preset_scenario(name)
        assert spec.name == name
        assert spec.n_grid == DEFAULT_N_GRID
        spec.build_model()
    with pytest.raises(ValueError, match="choices"):
        preset_scenario("case-v")


def test_preset_truth_values():
    t = preset_scenario("case-i").truth(256)
    assert (t.weight, t.mu[0], t.sigma[0, 0]) == (0.5, 2.5, 0.25)
    assert preset_scenario("case-ii").truth(256).weight == pytest.approx(0.125, abs=1e-15)
    assert preset_scenario("case-iii").truth(256).weight == pytest.approx(0.0625, abs=1e-15)
    assert preset_scenario("case-iv").truth(100).weight == pytest.approx(0.05, abs=1e-15)
    t = preset_scenario("nondist-sigma-drift").truth(256)
    assert t.weight == 0.25
    assert t.mu[0] == 0.0
    assert t.sigma[0, 0] == pytest.approx(2.25, abs=1e-15)
    t = preset_scenario("nondist-mu-drift").truth(256)
    assert t.mu[0] == pytest.approx(0.5, abs=1e-15)
    assert t.sigma[0, 0] == 1.0


def test_resolve_em_config_switches_m_step_for_heavy_tails():
    em = EmConfig()
    spec = tiny_scenario()
    assert resolve_em_config(spec, em).m_step_mode == "closed_form_gaussian"
    spec_t = tiny_scenario(bump={"kind": "student_t", "dof": 3})
    assert resolve_em_config(spec_t, em).m_step_mode == "numeric_ascent"
    spec_c = tiny_scenario(bump={"kind": "cauchy"})
    assert resolve_em_config(spec_c, em).m_step_mode == "numeric_ascent"


def test_study_hash_is_stable_and_sensitive():
    spec = tiny_scenario()
    em = resolve_em_config(spec, None)
    h = study_hash(spec, em)
    assert h == study_hash(spec, em)
    assert len(h) == 12 and set(h) <= set("0123456789abcdef")
    assert study_hash(tiny_scenario(seed=8), em) != h
    assert study_hash(spec, replace(em, max_iter=500)) != h


def test_study_cell_ignores_grid_context():
    spec_a = tiny_scenario()
    spec_b = tiny_scenario(n_grid=(40, 7000), n_reps=50)
    em = resolve_em_config(spec_a, None)
    cell_a = run_study_cell(spec_a, em, 40, 1)
    cell_b = run_study_cell(spec_b, em, 40, 1)
    for key in cell_a:
        if key == "seconds":
            continue
        assert cell_a[key] == cell_b[key], key


def test_tiny_study_end_to_end():
    spec = tiny_scenario()
    report = run_rate_study(spec)
    assert isinstance(report, RateStudyReport)
    assert len(report.cells) == 6
    assert report.n_from_cache == 0
    keys = [(c["n"], c["rep"]) for c in report.cells]
    assert keys == sorted(keys)
    for c in report.cells:
        assert c["converged"]
        assert c["err_lambda"] >= 0.0
        assert c["err_mu"] >= 0.0
        assert c["err_sigma"] >= 0.0
        assert 0.0 <= c["hellinger"] <= 1.0
        assert np.isfinite(c["loglik"])
    for ch in ("lambda", "mu", "sigma", "hellinger"):
        rows = report.per_n[ch]
        assert [r["n"] for r in rows] == [40, 90]
        for r in rows:
            assert r["q25"] <= r["median"] <= r["q75"]
        fit = report.slopes[ch]
        assert set(fit) == {"slope", "intercept", "std_error"}
        assert np.isfinite(fit["slope"])


def test_outputs_cache_and_byte_identity(tmp_path):
    spec = tiny_scenario()
    dir_a = str(tmp_path / "a")
    dir_b = str(tmp_path / "b")
    report = run_rate_study(spec, out_dir=dir_a)
    assert report.n_from_cache == 0
    for fname in ("cells.csv", "summary.json", "scenario.json", "timings.csv", "metadata.json"):
        assert os.path.exists(os.path.join(dir_a, fname)), fname

    cells_a = open(os.path.join(dir_a, "cells.csv"), "rb").read()
    summary_a = open(os.path.join(dir_a, "summary.json"), "rb").read()
    assert b"np.float64" not in cells_a

    rerun = run_rate_study(spec, out_dir=dir_a)
    assert rerun.n_from_cache == len(rerun.cells) == 6
    assert open(os.path.join(dir_a, "cells.csv"), "rb").read() == cells_a
    assert open(os.path.join(dir_a, "summary.json"), "rb").read() == summary_a
    assert [c["lambda_hat"] for c in rerun.cells] == [c["lambda_hat"] for c in report.cells]

    fresh = run_rate_study(spec, out_dir=dir_b)
    assert fresh.n_from_cache == 0
    assert open(os.path.join(dir_b, "cells.csv"), "rb").read() == cells_a
    assert open(os.path.join(dir_b, "summary.json"), "rb").read() == summary_a

    summary = json.loads(summary_a)
    assert summary["study_hash"] == report.study_hash
    assert summary["n_cells"] == 6
    header = cells_a.decode().splitlines()[0].split(",")
    assert header[:5] == ["n", "rep", "lambda_hat", "mu_hat", "sigma_hat"]


def test_worker_count_does_not_change_results(tmp_path):
    spec = tiny_scenario(n_grid=(40, 60), n_reps=2)
    serial = run_rate_study(spec, workers=1)
    parallel = run_rate_study(spec, workers=2)
    for a, b in zip(serial.cells, parallel.cells):
        for key in a:
            if key == "seconds":
                continue
            assert a[key] == b[key], key


def test_emit_plots_writes_valid_svg(tmp_path):
    spec = tiny_scenario()
    out = str(tmp_path / "plots")
    report = run_rate_study(spec, out_dir=out)
    written = emit_plots(report, out)
    names = sorted(os.path.basename(p) for p in written)
    assert names == ["hist.svg", "rate_lambda.svg", "rate_mu.svg", "rate_sigma.svg"]
    for path in written:
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")

    density = run_density_rate_study(spec, out_dir=out)
    assert density.n_from_cache == len(density.cells)
    hpath = os.path.join(out, "rate_hellinger.svg")
    assert ET.parse(hpath).getroot().tag.endswith("svg")

    first = open(os.path.join(out, "rate_lambda.svg"), "rb").read()
    emit_plots(report, out)
    assert open(os.path.join(out, "rate_lambda.svg"), "rb").read() == first
