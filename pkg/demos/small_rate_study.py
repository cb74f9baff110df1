"""Scaled-down convergence-rate study with plots.

Runs the case-i scenario (Cauchy reference, Gaussian bump at (2.5, 0.25),
constant lambda = 0.5) on a reduced grid so it finishes in well under a
minute, then fits log-log slopes per error channel and emits the SVG plots.
The full-size presets are available through `deviate rates --preset case-i`.
"""

import dataclasses
import os

from deviate import emit_plots, preset_scenario, run_rate_study

OUT = os.path.join(os.path.dirname(__file__), "out", "small-rate-study")

spec = dataclasses.replace(
    preset_scenario("case-i"),
    name="case-i-small",
    n_grid=(100, 316, 1000, 3162),
    n_reps=16,
)

report = run_rate_study(spec, out_dir=OUT)
print(f"{len(report.cells)} cells ({report.n_from_cache} from cache)")
print(f"{'channel':>10s} {'slope':>8s} {'stderr':>8s}")
for channel, fit in report.slopes.items():
    print(f"{channel:>10s} {fit['slope']:8.3f} {fit['std_error']:8.3f}")

emit_plots(report, OUT)
print(f"outputs under {OUT}: cells.csv, summary.json, rate_*.svg, hist.svg")
