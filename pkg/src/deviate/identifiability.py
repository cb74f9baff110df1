"""Numerical linear-independence tests for the deviation geometry.

The first-order test asks whether the reference density, the bump density
and the bump's first parameter derivatives are linearly independent as
functions; when they are, first-order loss bounds apply.  The second-order
test plays the same game with derivatives up to second order, for the bump
family alone.  Both are run as smallest-singular-value tests of a function
value matrix on a grid, with each function (column) scaled to unit grid norm
so the result does not depend on grid weighting or column units.

Sigma derivatives are taken with respect to the distinct entries of the
symmetric matrix (off-diagonal entries move in pairs), which changes column
scalings only and therefore leaves the rank decision unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .kernels import FrozenDensity, KernelFamily, ParamPoint

_GRID_WIDTHS = {
    "gaussian_loc_scale": 12.0,
    "gaussian_location_fixed_sigma": 12.0,
    "student_t_fixed_dof": 30.0,
    "cauchy_standard": 30.0,
}


@dataclass
class RankTestReport:
    """Outcome of a numerical linear-independence test.

    verdict is 'distinguishable' when the tested system is numerically
    independent, 'not_distinguishable' when it is numerically degenerate,
    and 'inconclusive' inside a one-decade buffer around the threshold.
    null_direction holds unit-norm combination coefficients (in the original
    function scaling) for the most nearly dependent direction.
    """

    order: int
    verdict: str
    singular_values: np.ndarray
    threshold: float
    column_labels: list[str] = field(default_factory=list)
    n_grid: int = 0
    null_direction: np.ndarray | None = None

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values[-1])

    @property
    def largest_singular_value(self) -> float:
        return float(self.singular_values[0])

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "verdict": self.verdict,
            "singular_values": self.singular_values.tolist(),
            "threshold": self.threshold,
            "column_labels": list(self.column_labels),
            "n_grid": self.n_grid,
            "null_direction": None
            if self.null_direction is None
            else self.null_direction.tolist(),
        }


def cosine_alignment(direction, pattern) -> float:
    """Absolute cosine between a null direction and a reference pattern."""
    a = np.asarray(direction, dtype=float).ravel()
    b = np.asarray(pattern, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError("direction and pattern lengths differ")
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0.0:
        raise ValueError("zero vector has no direction")
    return float(abs(a @ b) / denom)


def make_grid(
    family: KernelFamily,
    points,
    h0: FrozenDensity | None = None,
    n_grid: int = 512,
    seed: int = 0,
) -> np.ndarray:
    """Evaluation grid covering the effective support of every component.

    Equispaced for dim 1; a low-discrepancy (Sobol) box filling otherwise.
    """
    points = list(points)
    comps = [(p.mu, p.sigma, family.tag) for p in points]
    if h0 is not None:
        comps.append((h0.point.mu, h0.point.sigma, h0.tag))
    d = family.dim
    los, his = [], []
    for mu, sigma, tag in comps:
        width = _GRID_WIDTHS.get(tag, 12.0)
        sd = np.sqrt(np.diag(sigma))
        los.append(mu - width * sd)
        his.append(mu + width * sd)
    lo = np.min(los, axis=0)
    hi = np.max(his, axis=0)
    if d == 1:
        return np.linspace(float(lo[0]), float(hi[0]), int(n_grid)).reshape(-1, 1)
    sampler = qmc.Sobol(d=d, scramble=True, seed=seed)
    unit = sampler.random(int(n_grid))
    return qmc.scale(unit, lo, hi)


def _distinct_sigma_indices(d: int):
    return [(u, v) for u in range(d) for v in range(u, d)]


def _tied_sigma_columns(gsigma: np.ndarray, d: int):
    cols, tags = [], []
    for u, v in _distinct_sigma_indices(d):
        factor = 1.0 if u == v else 2.0
        cols.append(factor * gsigma[:, u, v])
        tags.append(f"sigma[{u},{v}]")
    return cols, tags


def _first_order_columns(family, point, grid):
    f = family.pdf(grid, point)
    gmu, gsigma = family.grad_params(grid, point)
    cols = [f]
    labels = ["f"]
    for i in range(family.dim):
        cols.append(gmu[:, i])
        labels.append(f"df/dmu[{i}]")
    if family.free_sigma:
        sig_cols, sig_tags = _tied_sigma_columns(gsigma, family.dim)
        cols.extend(sig_cols)
        labels.extend(f"df/d{t}" for t in sig_tags)
    return cols, labels


def _sigma_perturbation(d, u, v):
    p = np.zeros((d, d))
    p[u, v] = 1.0
    p[v, u] = 1.0
    return p


def _second_order_columns(family, point, grid, fd_step=1e-5):
    d = family.dim
    cols, labels = _first_order_columns(family, point, grid)
    if d == 1:
        f_mumu, f_mus, f_ss = family.second_derivs_1d(grid, point)
        cols.append(f_mumu)
        labels.append("d2f/dmu2")
        if family.free_sigma:
            cols.extend([f_mus, f_ss])
            labels.extend(["d2f/dmu dsigma", "d2f/dsigma2"])
        return cols, labels

    hess = family.hessian_mu(grid, point)
    for i in range(d):
        for j in range(i, d):
            cols.append(hess[:, i, j])
            labels.append(f"d2f/dmu[{i}] dmu[{j}]")
    if not family.free_sigma:
        return cols, labels

    # remaining blocks by central differences of the analytic first derivatives
    scale = max(1.0, float(np.abs(point.sigma).max()))
    eig_min = float(np.linalg.eigvalsh(point.sigma).min())
    h = min(fd_step * scale, 0.25 * eig_min)
    sig_idx = _distinct_sigma_indices(d)
    plus, minus = [], []
    for u, v in sig_idx:
        pert = h * _sigma_perturbation(d, u, v)
        plus.append(family.grad_params(grid, ParamPoint(point.mu, point.sigma + pert)))
        minus.append(family.grad_params(grid, ParamPoint(point.mu, point.sigma - pert)))
    for j, (u, v) in enumerate(sig_idx):
        dmu = (plus[j][0] - minus[j][0]) / (2.0 * h)
        for i in range(d):
            cols.append(dmu[:, i])
            labels.append(f"d2f/dmu[{i}] dsigma[{u},{v}]")
    for j, (u, v) in enumerate(sig_idx):
        dsig = (plus[j][1] - minus[j][1]) / (2.0 * h)
        tied, tags = _tied_sigma_columns(dsig, d)
        for col, tag, (u2, v2) in zip(tied, tags, sig_idx):
            if (u2, v2) >= (u, v):
                cols.append(col)
                labels.append(f"d2f/dsigma[{u},{v}] d{tag}")
    return cols, labels


def _rank_report(cols, labels, order, threshold_rel):
    matrix = np.column_stack(cols)
    m, k = matrix.shape
    if m < 3 * k:
        raise ValueError(f"grid of {m} points is too small for {k} functions (need 3x)")
    norms = np.linalg.norm(matrix, axis=0)
    if np.any(norms == 0.0):
        zero = labels[int(np.argmin(norms))]
        raise ValueError(f"function column {zero!r} vanishes on the grid")
    normalized = matrix / norms
    _, svals, vt = np.linalg.svd(normalized, full_matrices=False)
    threshold = threshold_rel * float(svals[0])
    smallest = float(svals[-1])
    if smallest > 10.0 * threshold:
        verdict = "distinguishable"
    elif smallest < threshold / 10.0:
        verdict = "not_distinguishable"
    else:
        verdict = "inconclusive"
    direction = vt[-1] / norms
    direction /= np.linalg.norm(direction)
    return RankTestReport(
        order=order,
        verdict=verdict,
        singular_values=svals,
        threshold=threshold,
        column_labels=labels,
        n_grid=m,
        null_direction=direction,
    )


def _validate_grid(family, grid):
    grid = family._rows(grid)
    if np.unique(grid, axis=0).shape[0] != grid.shape[0]:
        raise ValueError("grid contains duplicate points")
    return grid


def _as_points(family, points):
    if isinstance(points, ParamPoint):
        points = [points]
    points = [family.validate_point(p) for p in points]
    if not points:
        raise ValueError("need at least one parameter point")
    for i, p in enumerate(points):
        for q in points[:i]:
            if p.close_to(q, 1e-12):
                raise ValueError("parameter points must be distinct")
    return points


def check_first_order_distinguishability(
    h0: FrozenDensity,
    family: KernelFamily,
    points,
    grid=None,
    n_grid: int = 512,
    threshold_rel: float = 1e-6,
) -> RankTestReport:
    """Test {h0} + {f and first derivatives at each point} for independence."""
    points = _as_points(family, points)
    if grid is None:
        grid = make_grid(family, points, h0=h0, n_grid=n_grid)
    grid = _validate_grid(family, grid)
    cols = [h0.pdf(grid)]
    labels = ["h0"]
    for j, p in enumerate(points):
        pcols, plabels = _first_order_columns(family, p, grid)
        cols.extend(pcols)
        labels.extend(f"{t} @point{j}" for t in plabels)
    return _rank_report(cols, labels, order=1, threshold_rel=threshold_rel)


def check_second_order_identifiability(
    family: KernelFamily,
    points,
    grid=None,
    n_grid: int = 512,
    threshold_rel: float = 1e-6,
) -> RankTestReport:
    """Test the bump family's derivatives up to second order for independence."""
    points = _as_points(family, points)
    if grid is None:
        grid = make_grid(family, points, h0=None, n_grid=n_grid)
    grid = _validate_grid(family, grid)
    cols, labels = [], []
    for j, p in enumerate(points):
        pcols, plabels = _second_order_columns(family, p, grid)
        cols.extend(pcols)
        labels.extend(f"{t} @point{j}" for t in plabels)
    return _rank_report(cols, labels, order=2, threshold_rel=threshold_rel)


_CHECK_PRESETS = {
    "cauchy-gauss": "standard Cauchy reference vs Gaussian bump, first order",
    "gauss-same-point": "Gaussian reference equal to the bump at its anchor, first order",
    "gauss-location": "fixed-scale Gaussian location family, second order",
    "gauss-loc-scale": "Gaussian location-scale family, second order",
    "student-t3": "Student-t (3 dof) location-scale family, second order",
}


def check_preset_names() -> list[str]:
    return sorted(_CHECK_PRESETS)


def preset_check(name: str) -> dict:
    """Named test setups: {h0, family, points, order}; h0 is None for order 2."""
    from .kernels import (
        GaussianFamily,
        GaussianFixedScaleFamily,
        StudentTFamily,
        gaussian_density,
        standard_cauchy_density,
    )

    if name == "cauchy-gauss":
        fam = GaussianFamily(1)
        return {
            "h0": standard_cauchy_density(1),
            "family": fam,
            "points": [fam.point(2.5, 0.25)],
            "order": 1,
        }
    if name == "gauss-same-point":
        fam = GaussianFamily(1)
        return {
            "h0": gaussian_density(0.0, 1.0),
            "family": fam,
            "points": [fam.point(0.0, 1.0)],
            "order": 1,
        }
    if name == "gauss-location":
        fam = GaussianFixedScaleFamily(1, 1.0)
        return {"h0": None, "family": fam, "points": [fam.point(0.0)], "order": 2}
    if name == "gauss-loc-scale":
        fam = GaussianFamily(1)
        return {"h0": None, "family": fam, "points": [fam.point(0.0, 1.0)], "order": 2}
    if name == "student-t3":
        fam = StudentTFamily(1, 3)
        return {"h0": None, "family": fam, "points": [fam.point(0.0, 1.0)], "order": 2}
    raise ValueError(
        f"unknown check preset {name!r}; choices: {', '.join(check_preset_names())}"
    )


def heat_pde_residual(family: KernelFamily, point: ParamPoint, xs) -> float:
    """Largest entry of | d2f/dmu dmu^T - 2 df/dsigma | over the sample points.

    Zero (to rounding) exactly when the family satisfies the Gaussian heat
    identity, which is the algebraic source of second-order degeneracy for
    the Gaussian location-scale family.
    """
    _, gsigma = family.grad_params(xs, point)
    hess = family.hessian_mu(xs, point)
    return float(np.abs(hess - 2.0 * gsigma).max())
