"""Build a deviated model, sample from it, and plot density against data.

The model mixes a known reference density h0 with a parametric bump:
p(x) = (1 - lambda) h0(x) + lambda f(x | mu, sigma). Here h0 is a standard
Cauchy and the bump is a tight Gaussian sitting in the right tail, the same
configuration the rate experiments use.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from deviate import (
    DeviatedModel,
    DeviationParams,
    GaussianFamily,
    standard_cauchy_density,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

model = DeviatedModel(h0=standard_cauchy_density(1), family=GaussianFamily(1))
truth = DeviationParams(0.5, model.family.point(2.5, 0.25))

rng = np.random.default_rng(42)
data, labels = model.sample(truth, 2000, rng, return_labels=True)
print(f"sampled {data.shape[0]} points, {labels.sum()} from the bump component")

xs = np.linspace(-8.0, 8.0, 801)
density = model.pdf(truth, xs)
h0_part = (1.0 - truth.weight) * model.h0.pdf(xs)

fig, ax = plt.subplots(figsize=(7, 4))
ax.hist(data[:, 0], bins=120, range=(-8, 8), density=True,
        color="0.8", label="sample")
ax.plot(xs, density, color="C0", lw=2, label="mixture density")
ax.plot(xs, h0_part, color="C3", ls="--", label="(1-lambda) h0")
ax.set_xlabel("x")
ax.set_ylabel("density")
ax.legend(frameon=False)
fig.tight_layout()
path = os.path.join(OUT, "deviated_density.svg")
fig.savefig(path)
print(f"wrote {path}")
