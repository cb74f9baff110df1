"""Convergence-rate studies: simulate, fit, aggregate, and plot.

A scenario fixes the reference density, the bump family, and rules that map
the sample size n to the true deviation parameters.  A rate study runs a
grid of sample sizes with many replications each, fits every dataset by EM,
and regresses the mean log estimation error on log n per error channel
(weight, location, scale, and the Hellinger distance between fitted and true
densities).  Every cell derives its random stream from (seed, n, rep), so
results are independent of scheduling and worker count, and finished cells
are cached on disk so an interrupted study resumes without refitting.
"""

from __future__ import annotations

import csv
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .distances import QuadratureSpec, hellinger
from .estimation import EmConfig, em_fit
from .kernels import (
    CauchyFamily,
    CompactDomain,
    GaussianFamily,
    GaussianFixedScaleFamily,
    StudentTFamily,
    gaussian_density,
    standard_cauchy_density,
)
from .model import DeviatedModel, DeviationParams, ParamPoint
from .util import cell_rng, dump_json

DEFAULT_N_GRID = (100, 193, 373, 720, 1389, 2683, 5179, 10000)
CHANNELS = ("lambda", "mu", "sigma", "hellinger")
LOG_ERROR_FLOOR = 1e-300


@dataclass
class ScenarioSpec:
    """Declarative description of one rate study.

    The h0 and bump dicts pick densities: {"kind": "cauchy"},
    {"kind": "gaussian", "mu": .., "sigma": ..} (sigma is a variance),
    {"kind": "gaussian_fixed", "sigma": ..}, {"kind": "student_t", "dof": ..}.
    Rules map n to true values: {"kind": "constant", "value": v} or
    {"kind": "power", "offset": t, "coef": c, "exponent": e} meaning
    t + c * n**e.  For the scale channel, {"kind": "power_std", ...} applies
    the power law to the standard deviation and squares the result.
    """

    name: str
    h0: dict
    bump: dict
    weight_rule: dict
    mu_rule: dict
    sigma_rule: dict
    n_grid: tuple = DEFAULT_N_GRID
    n_reps: int = 64
    seed: int = 42
    dim: int = 1
    truth_adjacent_restart: bool = False
    domain_half_width: float = 100.0

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if len(self.n_grid) < 2 or len(set(self.n_grid)) != len(self.n_grid):
            raise ValueError("n_grid needs at least two distinct sample sizes")
        if any(n < 10 for n in self.n_grid):
            raise ValueError("sample sizes below 10 are not meaningful here")
        if self.n_reps < 1:
            raise ValueError("n_reps must be positive")
        for n in self.n_grid:
            w = _eval_rule(self.weight_rule, n)
            if not 0.0 < w <= 1.0:
                raise ValueError(
                    f"weight rule gives {w} at n={n}; the true model must deviate "
                    "(weight in (0, 1])"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioSpec":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**payload)

    def build_model(self) -> DeviatedModel:
        h0 = _density_from_dict(self.h0, self.dim)
        family = _family_from_dict(self.bump, self.dim)
        domain = CompactDomain.default(self.dim, half_width=self.domain_half_width)
        return DeviatedModel(h0=h0, family=family, domain=domain)

    def truth(self, n: int) -> DeviationParams:
        w = _eval_rule(self.weight_rule, n)
        mu = _eval_rule(self.mu_rule, n)
        sigma = _eval_rule(self.sigma_rule, n, is_scale=True)
        if self.dim != 1:
            raise ValueError("rule-based truths are defined for dim 1")
        return DeviationParams(w, ParamPoint(mu, sigma))


def _eval_rule(rule: dict, n: int, is_scale: bool = False) -> float:
    kind = rule.get("kind")
    if kind == "constant":
        return float(rule["value"])
    if kind == "power":
        return float(rule.get("offset", 0.0)) + float(rule["coef"]) * float(n) ** float(
            rule["exponent"]
        )
    if kind == "power_std":
        if not is_scale:
            raise ValueError("power_std only applies to the scale rule")
        std = float(rule.get("offset", 0.0)) + float(rule["coef"]) * float(n) ** float(
            rule["exponent"]
        )
        return std**2
    raise ValueError(f"unknown rule kind {kind!r}")


def _density_from_dict(payload: dict, dim: int):
    kind = payload.get("kind")
    if kind == "cauchy":
        return standard_cauchy_density(dim)
    if kind == "gaussian":
        mu = np.full(dim, float(payload.get("mu", 0.0)))
        sigma = np.eye(dim) * float(payload.get("sigma", 1.0))
        return gaussian_density(mu, sigma)
    raise ValueError(f"unknown reference density kind {kind!r}")


def _family_from_dict(payload: dict, dim: int):
    kind = payload.get("kind")
    if kind == "gaussian":
        return GaussianFamily(dim)
    if kind == "gaussian_fixed":
        return GaussianFixedScaleFamily(dim, np.eye(dim) * float(payload["sigma"]))
    if kind == "student_t":
        return StudentTFamily(dim, int(payload["dof"]))
    if kind == "cauchy":
        return CauchyFamily(dim)
    raise ValueError(f"unknown bump family kind {kind!r}")


_PRESETS = {
    "case-i": dict(
        h0={"kind": "cauchy"},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "constant", "value": 0.5},
        mu_rule={"kind": "constant", "value": 2.5},
        sigma_rule={"kind": "constant", "value": 0.25},
    ),
    "case-ii": dict(
        h0={"kind": "cauchy"},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "power", "coef": 0.5, "exponent": -0.25},
        mu_rule={"kind": "constant", "value": 2.5},
        sigma_rule={"kind": "constant", "value": 0.25},
    ),
    "case-iii": dict(
        h0={"kind": "cauchy"},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "power", "coef": 0.5, "exponent": -0.375},
        mu_rule={"kind": "constant", "value": 2.5},
        sigma_rule={"kind": "constant", "value": 0.25},
    ),
    "case-iv": dict(
        h0={"kind": "cauchy"},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "power", "coef": 0.5, "exponent": -0.5},
        mu_rule={"kind": "constant", "value": 2.5},
        sigma_rule={"kind": "constant", "value": 0.25},
    ),
    "nondist-sigma-drift": dict(
        h0={"kind": "gaussian", "mu": 0.0, "sigma": 1.0},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "constant", "value": 0.25},
        mu_rule={"kind": "constant", "value": 0.0},
        sigma_rule={"kind": "power_std", "offset": 1.0, "coef": 1.0, "exponent": -0.125},
    ),
    "nondist-mu-drift": dict(
        h0={"kind": "gaussian", "mu": 0.0, "sigma": 1.0},
        bump={"kind": "gaussian"},
        weight_rule={"kind": "constant", "value": 0.25},
        mu_rule={"kind": "power", "coef": 1.0, "exponent": -0.125},
        sigma_rule={"kind": "constant", "value": 1.0},
    ),
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset_scenario(name: str, **overrides) -> ScenarioSpec:
    """Build one of the named study presets, optionally overriding fields."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choices: {', '.join(preset_names())}")
    payload = dict(_PRESETS[name])
    payload.update(overrides)
    return ScenarioSpec(name=name, **payload)


def study_hash(spec: ScenarioSpec, em: EmConfig) -> str:
    text = dump_json({"scenario": spec.to_dict(), "em": asdict(em)}, indent=None)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def resolve_em_config(spec: ScenarioSpec, em: EmConfig | None) -> EmConfig:
    em = em or EmConfig()
    family = _family_from_dict(spec.bump, spec.dim)
    if em.m_step_mode == "closed_form_gaussian" and not family.tag.startswith("gaussian"):
        em = replace(em, m_step_mode="numeric_ascent")
    return em


def run_study_cell(spec: ScenarioSpec, em: EmConfig, n: int, rep: int) -> dict:
    """Simulate and fit one (n, rep) cell; deterministic given (seed, n, rep)."""
    model = spec.build_model()
    truth = spec.truth(n)
    data_rng, fit_rng = cell_rng(spec.seed, n, rep).spawn(2)
    data = model.sample(truth, n, data_rng)
    extra = [(0.5, model.h0.point)] if spec.truth_adjacent_restart else []
    started = time.perf_counter()
    fit = em_fit(model, data, em, fit_rng, extra_inits=extra)
    seconds = time.perf_counter() - started
    h = hellinger(model, fit.params, truth, QuadratureSpec())
    p = fit.params
    return {
        "n": int(n),
        "rep": int(rep),
        "lambda_hat": p.weight,
        "mu_hat": p.mu.tolist(),
        "sigma_hat": p.sigma.tolist(),
        "err_lambda": abs(p.weight - truth.weight),
        "err_mu": float(np.linalg.norm(p.mu - truth.mu)),
        "err_sigma": float(np.linalg.norm(p.sigma - truth.sigma)),
        "hellinger": h.value,
        "loglik": fit.loglik,
        "converged": bool(fit.converged),
        "n_iter": int(fit.n_iter),
        "seconds": seconds,
    }


def _cell_task(payload):
    scenario_dict, em_dict, n, rep = payload
    spec = ScenarioSpec.from_dict(scenario_dict)
    return run_study_cell(spec, EmConfig(**em_dict), n, rep)


@dataclass
class RateStudyReport:
    spec: ScenarioSpec
    em: EmConfig
    cells: list[dict]
    per_n: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    study_hash: str = ""
    n_from_cache: int = 0

    def summary_dict(self) -> dict:
        """Deterministic summary (no timing information)."""
        return {
            "scenario": self.spec.to_dict(),
            "em": asdict(self.em),
            "study_hash": self.study_hash,
            "n_cells": len(self.cells),
            "n_converged": sum(1 for c in self.cells if c["converged"]),
            "per_n": self.per_n,
            "slopes": self.slopes,
        }


def fit_loglog_slope(n_values, log_errors) -> dict:
    """Least-squares slope of log error against log n, with its standard error."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.asarray(log_errors, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need matching arrays with at least two points")
    if np.unique(x).size < 2:
        raise ValueError("sample sizes must not be constant")
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    if x.size > 2:
        s2 = float(np.sum(resid**2)) / (x.size - 2)
        std_error = float(np.sqrt(s2 / sxx))
    else:
        std_error = 0.0
    return {"slope": slope, "intercept": intercept, "std_error": std_error}


def _aggregate(spec: ScenarioSpec, cells: list[dict]):
    err_keys = {
        "lambda": "err_lambda",
        "mu": "err_mu",
        "sigma": "err_sigma",
        "hellinger": "hellinger",
    }
    per_n = {ch: [] for ch in CHANNELS}
    for n in spec.n_grid:
        rows = [c for c in cells if c["n"] == n]
        for ch in CHANNELS:
            errs = np.array([max(c[err_keys[ch]], LOG_ERROR_FLOOR) for c in rows])
            logs = np.log(errs)
            q25, med, q75 = np.quantile(logs, [0.25, 0.5, 0.75])
            per_n[ch].append(
                {
                    "n": int(n),
                    "mean_log_error": float(logs.mean()),
                    "q25": float(q25),
                    "median": float(med),
                    "q75": float(q75),
                }
            )
    slopes = {
        ch: fit_loglog_slope(
            [row["n"] for row in per_n[ch]],
            [row["mean_log_error"] for row in per_n[ch]],
        )
        for ch in CHANNELS
    }
    return per_n, slopes


def _cache_path(cache_dir, h, n, rep):
    return os.path.join(cache_dir, f"{h}-n{n:06d}-r{rep:04d}.json")


def run_rate_study(
    spec: ScenarioSpec,
    em: EmConfig | None = None,
    out_dir: str | None = None,
    workers: int = 1,
) -> RateStudyReport:
    """Run (or resume) a full rate study and optionally write its output tree."""
    em = resolve_em_config(spec, em)
    h = study_hash(spec, em)
    tasks = [(n, rep) for n in spec.n_grid for rep in range(spec.n_reps)]

    cached = {}
    cache_dir = None
    if out_dir:
        cache_dir = os.path.join(out_dir, "cache")
        os.makedirs(cache_dir, exist_ok=True)
        import json

        for n, rep in tasks:
            path = _cache_path(cache_dir, h, n, rep)
            if os.path.exists(path):
                with open(path) as fh:
                    cached[(n, rep)] = json.load(fh)

    todo = [(n, rep) for n, rep in tasks if (n, rep) not in cached]
    spec_dict, em_dict = spec.to_dict(), asdict(em)
    payloads = [(spec_dict, em_dict, n, rep) for n, rep in todo]
    started = time.time()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(_cell_task, payloads, chunksize=4))
    else:
        fresh = [_cell_task(p) for p in payloads]
    wall = time.time() - started

    results = dict(cached)
    for cell in fresh:
        key = (cell["n"], cell["rep"])
        results[key] = cell
        if cache_dir:
            dump_json(cell, _cache_path(cache_dir, h, *key))

    cells = [results[key] for key in sorted(results)]
    per_n, slopes = _aggregate(spec, cells)
    report = RateStudyReport(
        spec=spec,
        em=em,
        cells=cells,
        per_n=per_n,
        slopes=slopes,
        study_hash=h,
        n_from_cache=len(cached),
    )
    if out_dir:
        write_study_outputs(report, out_dir, wall_seconds=wall, workers=workers)
    return report


def _csv_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v))


def write_study_outputs(
    report: RateStudyReport, out_dir: str, wall_seconds: float = 0.0, workers: int = 1
) -> None:
    """Write cells.csv, summary.json, scenario.json, timings.csv, metadata.json.

    cells.csv and summary.json are byte-identical across reruns of the same
    (scenario, seed); wall-clock figures go to timings.csv and metadata.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    d = report.spec.dim
    if d == 1:
        mu_cols, sigma_cols = ["mu_hat"], ["sigma_hat"]
    else:
        mu_cols = [f"mu_hat_{i + 1}" for i in range(d)]
        sigma_cols = [f"sigma_hat_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]
    header = (
        ["n", "rep", "lambda_hat"]
        + mu_cols
        + sigma_cols
        + ["err_lambda", "err_mu", "err_sigma", "hellinger", "loglik", "converged", "n_iter"]
    )
    with open(os.path.join(out_dir, "cells.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for c in report.cells:
            mu = np.asarray(c["mu_hat"], dtype=float).ravel()
            sigma = np.asarray(c["sigma_hat"], dtype=float).ravel()
            row = [c["n"], c["rep"], c["lambda_hat"], *mu, *sigma]
            row += [
                c["err_lambda"],
                c["err_mu"],
                c["err_sigma"],
                c["hellinger"],
                c["loglik"],
                c["converged"],
                c["n_iter"],
            ]
            writer.writerow([_csv_value(v) for v in row])
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "rep", "seconds"])
        for c in report.cells:
            writer.writerow([c["n"], c["rep"], repr(float(c["seconds"]))])
    dump_json(report.summary_dict(), os.path.join(out_dir, "summary.json"))
    dump_json(report.spec.to_dict(), os.path.join(out_dir, "scenario.json"))
    dump_json(
        {
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "wall_seconds": wall_seconds,
            "workers": workers,
            "study_hash": report.study_hash,
            "n_from_cache": report.n_from_cache,
        },
        os.path.join(out_dir, "metadata.json"),
    )


def run_density_rate_study(
    spec: ScenarioSpec,
    em: EmConfig | None = None,
    out_dir: str | None = None,
    workers: int = 1,
) -> RateStudyReport:
    """Rate study focused on the Hellinger distance between fitted and true density.

    Shares all machinery (and any cache) with run_rate_study; when an output
    directory is given, the Hellinger channel plot is written as well.
    """
    report = run_rate_study(spec, em=em, out_dir=out_dir, workers=workers)
    if out_dir:
        emit_plots(report, out_dir, channels=("hellinger",), histogram=False)
    return report


def emit_plots(
    report: RateStudyReport,
    out_dir: str,
    channels=("lambda", "mu", "sigma"),
    histogram: bool = True,
) -> list[str]:
    """Write one rate SVG per channel plus a dataset histogram SVG.

    SVG output is made byte-reproducible by pinning matplotlib's hash salt
    and stripping the date metadata.
    """
    import matplotlib

    matplotlib.use("Agg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = report.study_hash
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written = []
    labels = {
        "lambda": "weight",
        "mu": "location",
        "sigma": "scale",
        "hellinger": "Hellinger",
    }
    for ch in channels:
        rows = report.per_n[ch]
        ns = np.array([r["n"] for r in rows], dtype=float)
        mean = np.array([r["mean_log_error"] for r in rows])
        lo = np.clip(mean - np.array([r["q25"] for r in rows]), 0.0, None)
        hi = np.clip(np.array([r["q75"] for r in rows]) - mean, 0.0, None)
        fit = report.slopes[ch]
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.errorbar(ns, mean, yerr=[lo, hi], fmt="o", capsize=3, color="tab:blue")
        grid = np.geomspace(ns.min(), ns.max(), 64)
        ax.plot(grid, fit["intercept"] + fit["slope"] * np.log(grid), "-", color="tab:orange")
        ax.set_xscale("log")
        ax.set_xlabel("sample size n")
        ax.set_ylabel(f"mean log error ({labels[ch]})")
        ax.set_title(
            f"{report.spec.name}: {labels[ch]} slope {fit['slope']:.3f} "
            f"(se {fit['std_error']:.3f})"
        )
        fig.tight_layout()
        path = os.path.join(out_dir, f"rate_{ch}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    if histogram:
        n_max = max(report.spec.n_grid)
        model = report.spec.build_model()
        truth = report.spec.truth(n_max)
        rng = cell_rng(report.spec.seed, n_max, report.spec.n_reps)
        data = model.sample(truth, n_max, rng)
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        x = data[:, 0]
        core = np.percentile(x, [0.5, 99.5])
        ax.hist(x, bins=80, range=(core[0], core[1]), density=True, color="tab:blue", alpha=0.6)
        grid = np.linspace(core[0], core[1], 512)
        ax.plot(grid, model.pdf(truth, grid.reshape(-1, 1)), "k-", lw=1.2)
        ax.set_title(f"{report.spec.name}: one dataset at n={n_max}")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        fig.tight_layout()
        path = os.path.join(out_dir, "hist.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
