"""The deviated mixture: a fixed reference density plus one parametric bump.

The density is p(x) = (1 - w) * h0(x) + w * f(x | mu, sigma) where h0 is a
known, fixed density, f comes from a kernel family, and w in [0, 1] is the
deviation weight.  Evaluation stays in log space end to end.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .kernels import (
    PDF_FLOOR,
    CompactDomain,
    FrozenDensity,
    KernelFamily,
    ParamPoint,
)
from .util import as_generator

LOG_PDF_FLOOR = float(np.log(PDF_FLOOR))


@dataclass
class DeviationParams:
    """Mixture parameters: deviation weight plus the bump's location-scale point."""

    weight: float
    point: ParamPoint

    def __post_init__(self):
        self.weight = float(self.weight)
        if not np.isfinite(self.weight) or not 0.0 <= self.weight <= 1.0:
            raise DomainError(f"weight must lie in [0, 1], got {self.weight}")

    @property
    def mu(self) -> np.ndarray:
        return self.point.mu

    @property
    def sigma(self) -> np.ndarray:
        return self.point.sigma

    def to_dict(self) -> dict:
        if self.point.dim == 1:
            mu, sigma = float(self.mu[0]), float(self.sigma[0, 0])
        else:
            mu, sigma = self.mu.tolist(), self.sigma.tolist()
        return {"lambda": self.weight, "mu": mu, "sigma": sigma}

    @classmethod
    def from_dict(cls, payload: dict) -> "DeviationParams":
        return cls(payload["lambda"], ParamPoint(payload["mu"], payload["sigma"]))


@dataclass
class DeviatedModel:
    """Deviated mixture model: known reference h0 plus one kernel-family bump."""

    h0: FrozenDensity
    family: KernelFamily
    domain: CompactDomain | None = None

    def __post_init__(self):
        if self.domain is None:
            self.domain = CompactDomain.default(self.family.dim)
        dims = {self.h0.dim, self.family.dim, self.domain.dim}
        if len(dims) != 1:
            raise ValueError(f"h0, family and domain dims disagree: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.family.dim

    def log_pdf(self, params: DeviationParams, x) -> np.ndarray:
        w = params.weight
        if w == 0.0:
            return self.h0.log_pdf(x)
        log_f = self.family.log_pdf(x, params.point)
        if w == 1.0:
            return log_f
        log_h = self.h0.log_pdf(x)
        return np.logaddexp(np.log1p(-w) + log_h, np.log(w) + log_f)

    def pdf(self, params: DeviationParams, x) -> np.ndarray:
        return np.exp(self.log_pdf(params, x))

    def log_likelihood(self, params: DeviationParams, data) -> float:
        """Total log likelihood, with per-point values clamped at log(1e-300).

        The clamp keeps the total finite when a point underflows both mixture
        branches; a warning reports how many points were clamped.
        """
        log_p = self.log_pdf(params, data)
        n_clamped = int(np.count_nonzero(log_p < LOG_PDF_FLOOR))
        if n_clamped:
            warnings.warn(
                f"log density clamped at {n_clamped} data point(s)", RuntimeWarning
            )
            log_p = np.maximum(log_p, LOG_PDF_FLOOR)
        return float(log_p.sum())

    def sample(self, params: DeviationParams, n: int, rng=None, return_labels: bool = False):
        """Draw n rows; labels mark rows that came from the bump component."""
        rng = as_generator(rng)
        n = int(n)
        labels = rng.random(n) < params.weight
        from_h0 = self.h0.sample(n, rng)
        from_bump = self.family.sample(params.point, n, rng)
        x = np.where(labels[:, None], from_bump, from_h0)
        if return_labels:
            return x, labels
        return x


def save_dataset(path, x, labels=None) -> None:
    """Write rows as CSV with header x1,...,xd and an optional label column."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    d = x.shape[1]
    header = [f"x{i + 1}" for i in range(d)]
    if labels is not None:
        labels = np.asarray(labels).astype(int)
        if labels.shape[0] != x.shape[0]:
            raise ValueError("labels length does not match data")
        header.append("label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(x.shape[0]):
            row = [repr(float(v)) for v in x[i]]
            if labels is not None:
                row.append(str(int(labels[i])))
            writer.writerow(row)


def load_dataset(path):
    """Read a dataset CSV; returns (x, labels) with labels None when absent."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_labels = bool(header) and header[-1] == "label"
        d = len(header) - int(has_labels)
        if d < 1 or header[:d] != [f"x{i + 1}" for i in range(d)]:
            raise ValueError(f"unrecognized dataset header: {header}")
        xs, labels = [], []
        for row in reader:
            if not row:
                continue
            xs.append([float(v) for v in row[:d]])
            if has_labels:
                labels.append(int(row[d]))
    x = np.asarray(xs, dtype=float).reshape(-1, d)
    return x, (np.asarray(labels, dtype=bool) if has_labels else None)
