"""Command line interface.

Subcommands
-----------
simulate             draw a dataset from a preset or an explicit model
fit                  run the EM estimator on a dataset CSV
rates                run a convergence-rate study preset or scenario file
verify-bounds        probe distance/loss ratio bounds empirically
check-identifiability  run the linear-independence rank tests
losses               evaluate the loss functionals on a pair of configurations

Common flags: --seed (default 42), --out (default $DEVIATE_OUT or
./deviate-out), --threads (default auto), --format {json,csv} for
machine-readable stdout.  Exit codes: 0 success, 2 usage, 3 domain,
4 estimation, 5 numerics, 6 I/O.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import bounds as bounds_mod
from . import experiments as exp
from . import identifiability as ident
from . import losses as losses_mod
from .distances import QuadratureSpec
from .estimation import EmConfig, em_fit
from .exceptions import DomainError, EstimationError, NumericError
from .kernels import (
    CauchyFamily,
    GaussianFamily,
    GaussianFixedScaleFamily,
    ParamPoint,
    StudentTFamily,
    gaussian_density,
    standard_cauchy_density,
)
from .model import DeviatedModel, DeviationParams, load_dataset, save_dataset
from .util import cell_rng, dump_json


def _parse_density(text: str):
    """Reference density spec: 'cauchy' or 'gauss:MU,VAR'."""
    kind, _, rest = text.partition(":")
    if kind == "cauchy":
        return standard_cauchy_density(1)
    if kind == "gauss":
        try:
            mu, var = (float(v) for v in rest.split(","))
        except Exception as exc:
            raise ValueError(f"expected gauss:MU,VAR, got {text!r}") from exc
        return gaussian_density(mu, var)
    raise ValueError(f"unknown reference density {text!r}")


def _parse_family(text: str):
    """Bump family spec: 'gauss', 'gauss-fixed:VAR', 't:NU' or 'cauchy'."""
    kind, _, rest = text.partition(":")
    if kind == "gauss":
        return GaussianFamily(1)
    if kind == "gauss-fixed":
        return GaussianFixedScaleFamily(1, float(rest))
    if kind == "t":
        return StudentTFamily(1, int(rest))
    if kind == "cauchy":
        return CauchyFamily(1)
    raise ValueError(f"unknown bump family {text!r}")


def _parse_config(text: str) -> DeviationParams:
    """Configuration triple 'WEIGHT:MU:VAR'."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected WEIGHT:MU:VAR, got {text!r}")
    w, mu, var = (float(v) for v in parts)
    return DeviationParams(w, ParamPoint(mu, var))


def _parse_point(text: str) -> ParamPoint:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"expected MU:VAR, got {text!r}")
    return ParamPoint(float(parts[0]), float(parts[1]))


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _out_dir(args) -> str:
    out = args.out or os.environ.get("DEVIATE_OUT") or "deviate-out"
    os.makedirs(out, exist_ok=True)
    return out


def _threads(args) -> int:
    if args.threads == "auto":
        return os.cpu_count() or 1
    n = int(args.threads)
    if n < 1:
        raise ValueError("--threads must be at least 1")
    return n


def _build_model_from_args(args) -> DeviatedModel:
    return DeviatedModel(h0=_parse_density(args.h0), family=_parse_family(args.f))


def _em_config_from_args(args) -> EmConfig:
    cfg = EmConfig()
    overrides = {}
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    if args.restarts is not None:
        overrides["n_restarts"] = args.restarts
    if args.tol_loglik is not None:
        overrides["tol_loglik"] = args.tol_loglik
    if args.tol_param is not None:
        overrides["tol_param"] = args.tol_param
    if args.m_step is not None:
        overrides["m_step_mode"] = args.m_step
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _cmd_simulate(args) -> int:
    if args.preset:
        spec = exp.preset_scenario(args.preset, seed=args.seed)
        if args.n is None:
            raise ValueError("--n is required with --preset")
        model = spec.build_model()
        truth = spec.truth(args.n)
        rng = cell_rng(spec.seed, args.n, args.rep).spawn(2)[0]
    else:
        for flag in ("h0", "f", "weight", "mu", "sigma"):
            if getattr(args, flag) is None:
                raise ValueError(f"--{flag} is required without --preset")
        if args.n is None:
            raise ValueError("--n is required")
        model = _build_model_from_args(args)
        truth = DeviationParams(args.weight, ParamPoint(args.mu, args.sigma))
        rng = cell_rng(args.seed, args.n, args.rep).spawn(2)[0]
    x, labels = model.sample(truth, args.n, rng, return_labels=True)
    out = _out_dir(args)
    path = os.path.join(out, args.out_file)
    save_dataset(path, x, None if args.no_labels else labels)
    print(dump_json({"path": path, "n": args.n, "truth": truth.to_dict()}))
    return 0


def _cmd_fit(args) -> int:
    x, _ = load_dataset(args.data)
    model = _build_model_from_args(args)
    cfg = _em_config_from_args(args)
    if cfg.m_step_mode == "closed_form_gaussian" and not model.family.tag.startswith(
        "gaussian"
    ):
        cfg = replace(cfg, m_step_mode="numeric_ascent")
    fit = em_fit(model, x, cfg, np.random.default_rng(args.seed))
    payload = fit.to_dict()
    out = _out_dir(args)
    path = os.path.join(out, args.out_file)
    dump_json(payload, path)
    print(dump_json(payload))
    return 0


def _load_scenario(args) -> exp.ScenarioSpec:
    if args.preset:
        overrides = {"seed": args.seed}
        if args.n_reps is not None:
            overrides["n_reps"] = args.n_reps
        if args.n_grid is not None:
            overrides["n_grid"] = tuple(_parse_ints(args.n_grid))
        return exp.preset_scenario(args.preset, **overrides)
    if not args.scenario:
        raise ValueError("provide --preset or --scenario FILE")
    with open(args.scenario) as fh:
        payload = json.load(fh)
    payload.setdefault("seed", args.seed)
    if args.n_reps is not None:
        payload["n_reps"] = args.n_reps
    if args.n_grid is not None:
        payload["n_grid"] = _parse_ints(args.n_grid)
    return exp.ScenarioSpec.from_dict(payload)


def _cmd_rates(args) -> int:
    spec = _load_scenario(args)
    if args.dump_preset:
        print(dump_json(spec.to_dict()))
        return 0
    out = os.path.join(_out_dir(args), f"scenario-{spec.name}")
    report = exp.run_rate_study(spec, out_dir=out, workers=_threads(args))
    if not args.no_plots:
        channels = ("lambda", "mu", "sigma")
        if args.hellinger_plot:
            channels += ("hellinger",)
        exp.emit_plots(report, out, channels=channels)
    summary = {
        "scenario": spec.name,
        "out_dir": out,
        "slopes": report.slopes,
        "n_cells": len(report.cells),
    }
    if args.format == "csv":
        print("channel,slope,intercept,std_error")
        for ch, fit in report.slopes.items():
            print(f"{ch},{fit['slope']!r},{fit['intercept']!r},{fit['std_error']!r}")
    else:
        print(dump_json(summary))
    return 0


def _cmd_verify_bounds(args) -> int:
    model, loss_name, reference = bounds_mod.preset_probe(args.preset)
    if args.dump_preset:
        print(
            dump_json(
                {
                    "preset": args.preset,
                    "loss": loss_name,
                    "reference": reference.to_dict(),
                    "radii": _parse_floats(args.radii),
                    "pairs": args.pairs,
                }
            )
        )
        return 0
    radii = _parse_floats(args.radii)
    quad = QuadratureSpec(abs_tol=1e-8)
    if args.compare:
        names = [loss_name] + [s.strip() for s in args.compare.split(",") if s.strip()]
        results = bounds_mod.compare_bound_probes(
            model, names, reference, radii=radii, n_pairs=args.pairs, quad=quad,
            seed=args.seed,
        )
    else:
        results = {
            loss_name: bounds_mod.probe_bound(
                model, loss_name, reference, radii=radii, n_pairs=args.pairs,
                quad=quad, seed=args.seed,
            )
        }
    payload = {
        "preset": args.preset,
        "reference": reference.to_dict(),
        "reports": {k: [r.to_dict() for r in v] for k, v in results.items()},
    }
    path = os.path.join(_out_dir(args), f"bounds-{args.preset}.json")
    dump_json(payload, path)
    if args.format == "json":
        print(dump_json(payload))
    elif args.format == "csv":
        print("loss,radius,min_ratio,max_ratio,n_excluded")
        for name, reports in results.items():
            for r in reports:
                print(
                    f"{name},{r.radius!r},{r.min_ratio!r},{r.max_ratio!r},{r.n_excluded}"
                )
    else:
        print(f"bound probe {args.preset} (written to {path})")
        print(f"{'loss':<6} {'radius':>8} {'min ratio':>12} {'max ratio':>12} {'excluded':>9}")
        for name, reports in results.items():
            for r in reports:
                print(
                    f"{name:<6} {r.radius:>8.3g} {r.min_ratio:>12.5g} "
                    f"{r.max_ratio:>12.5g} {r.n_excluded:>9d}"
                )
    return 0


def _cmd_check_identifiability(args) -> int:
    if args.preset:
        setup = ident.preset_check(args.preset)
    else:
        if args.f is None or args.mu is None:
            raise ValueError("provide --preset or at least --f and --mu")
        family = _parse_family(args.f)
        sigma = args.sigma
        if isinstance(family, GaussianFixedScaleFamily):
            point = family.point(args.mu)
        else:
            if sigma is None:
                raise ValueError("--sigma is required for this family")
            point = family.point(args.mu, sigma)
        setup = {
            "h0": _parse_density(args.h0) if args.h0 else None,
            "family": family,
            "points": [point],
            "order": args.order,
        }
    if args.dump_preset:
        print(
            dump_json(
                {
                    "preset": args.preset,
                    "order": setup["order"],
                    "family": setup["family"].tag,
                    "h0": None if setup["h0"] is None else setup["h0"].tag,
                    "points": [
                        {"mu": p.mu.tolist(), "sigma": p.sigma.tolist()}
                        for p in setup["points"]
                    ],
                }
            )
        )
        return 0
    if setup["order"] == 1:
        if setup["h0"] is None:
            raise ValueError("a first-order check needs a reference density (--h0)")
        report = ident.check_first_order_distinguishability(
            setup["h0"], setup["family"], setup["points"], n_grid=args.grid_size
        )
    else:
        report = ident.check_second_order_identifiability(
            setup["family"], setup["points"], n_grid=args.grid_size
        )
    payload = report.to_dict()
    path = os.path.join(_out_dir(args), "identifiability.json")
    dump_json(payload, path)
    if args.format == "json":
        print(dump_json(payload))
    else:
        print(
            f"order {report.order} verdict: {report.verdict} "
            f"(smallest sv {report.smallest_singular_value:.3e}, "
            f"threshold {report.threshold:.3e})"
        )
    return 0


def _cmd_losses(args) -> int:
    g = _parse_config(args.g)
    gs = _parse_config(args.g_star)
    anchor = _parse_point(args.anchor)
    orders = _parse_floats(args.orders)
    rows = [
        ("K", losses_mod.loss_K(g, gs)),
        ("D", losses_mod.loss_D(g, gs, anchor)),
        ("Dbar", losses_mod.loss_Dbar(g, gs, anchor)),
        ("Q", losses_mod.loss_Q(g, gs, anchor)),
        ("Qprime", losses_mod.loss_Qprime(g, gs, anchor)),
    ]
    for r in orders:
        rows.append((f"D_r[r={r:g}]", losses_mod.loss_Dr(g, gs, anchor, r)))
        rows.append(
            (f"W_r^r[r={r:g}]", losses_mod.wasserstein_two_atom(g, gs, anchor, r))
        )
    payload = {
        "g": g.to_dict(),
        "g_star": gs.to_dict(),
        "anchor": {"mu": float(anchor.mu[0]), "sigma": float(anchor.sigma[0, 0])},
        "values": {name: value for name, value in rows},
    }
    if args.out_file:
        dump_json(payload, os.path.join(_out_dir(args), args.out_file))
    if args.format == "json":
        print(dump_json(payload))
    elif args.format == "csv":
        print("loss,value")
        for name, value in rows:
            print(f"{name},{value!r}")
    else:
        width = max(len(name) for name, _ in rows)
        for name, value in rows:
            print(f"{name:<{width}}  {value:.10g}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=42, help="base random seed")
    parser.add_argument(
        "--out", default=None, help="output directory (default $DEVIATE_OUT or ./deviate-out)"
    )
    parser.add_argument(
        "--threads", default="auto", help="worker count for parallel studies"
    )
    parser.add_argument(
        "--format", choices=("json", "csv"), default=None,
        help="machine-readable stdout format",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deviate",
        description="Numerical laboratory for deviated mixture models.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="draw a dataset and write it as CSV")
    _add_common(p)
    p.add_argument("--preset", help="scenario preset name")
    p.add_argument("--h0", help="reference density, e.g. cauchy or gauss:0,1")
    p.add_argument("--f", help="bump family, e.g. gauss, gauss-fixed:1, t:3")
    p.add_argument("--weight", type=float, help="true deviation weight")
    p.add_argument("--mu", type=float, help="true bump location")
    p.add_argument("--sigma", type=float, help="true bump variance")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--rep", type=int, default=0, help="replication index for the stream")
    p.add_argument("--out-file", default="dataset.csv")
    p.add_argument("--no-labels", action="store_true", help="omit the label column")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit the deviated model to a dataset CSV")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--h0", default="cauchy")
    p.add_argument("--f", default="gauss")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--tol-loglik", type=float, default=None)
    p.add_argument("--tol-param", type=float, default=None)
    p.add_argument(
        "--m-step", choices=("closed_form_gaussian", "numeric_ascent"), default=None
    )
    p.add_argument("--out-file", default="fit.json")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("rates", help="run a convergence-rate study")
    _add_common(p)
    p.add_argument("--preset", help=f"one of: {', '.join(exp.preset_names())}")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--n-reps", type=int, default=None)
    p.add_argument("--n-grid", default=None, help="comma-separated sample sizes")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument(
        "--hellinger-plot", action="store_true", help="also plot the Hellinger channel"
    )
    p.add_argument("--dump-preset", action="store_true", help="print the scenario and exit")
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("verify-bounds", help="probe distance/loss ratio bounds")
    _add_common(p)
    p.add_argument(
        "--preset", required=True,
        help=f"one of: {', '.join(bounds_mod.probe_preset_names())}",
    )
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--radii", default="0.5,0.2,0.05")
    p.add_argument(
        "--compare", default=None,
        help="comma-separated extra losses to evaluate on the same pairs",
    )
    p.add_argument("--dump-preset", action="store_true")
    p.set_defaults(func=_cmd_verify_bounds)

    p = sub.add_parser("check-identifiability", help="run the rank tests")
    _add_common(p)
    p.add_argument(
        "--preset", help=f"one of: {', '.join(ident.check_preset_names())}"
    )
    p.add_argument("--h0", help="reference density for first-order checks")
    p.add_argument("--f", help="bump family")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--grid-size", type=int, default=512)
    p.add_argument("--dump-preset", action="store_true")
    p.set_defaults(func=_cmd_check_identifiability)

    p = sub.add_parser("losses", help="evaluate the loss functionals on a pair")
    _add_common(p)
    p.add_argument("--g", required=True, help="configuration WEIGHT:MU:VAR")
    p.add_argument("--g-star", required=True, help="configuration WEIGHT:MU:VAR")
    p.add_argument("--anchor", default="0:1", help="anchor MU:VAR")
    p.add_argument("--orders", default="1,2", help="comma-separated Wasserstein orders")
    p.add_argument("--out-file", default=None)
    p.set_defaults(func=_cmd_losses)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"domain-error: {exc}", file=sys.stderr)
        return 3
    except EstimationError as exc:
        print(f"estimation-error: {exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"numeric-error: {exc}", file=sys.stderr)
        return 5
    except (ValueError, KeyError) as exc:
        print(f"usage-error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())
