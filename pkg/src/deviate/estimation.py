"""Maximum likelihood for the deviated mixture via EM with restarts.

The E-step computes bump responsibilities in log space; the M-step updates
the weight by their mean and the bump parameters either in closed form
(Gaussian families) or by damped gradient ascent in a log-Cholesky
parameterization (heavy-tailed families).  Data rows are put into a canonical
sorted order on entry, so results do not depend on row order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import EstimationError
from .kernels import EIG_FLOOR, ParamPoint, sigma_grad_to_logchol
from .model import LOG_PDF_FLOOR, DeviatedModel, DeviationParams
from .util import as_generator

_GAUSSIAN_TAGS = ("gaussian_loc_scale", "gaussian_location_fixed_sigma")


@dataclass(frozen=True)
class EmConfig:
    """Tuning knobs for em_fit.

    Convergence stops on relative log-likelihood change below tol_loglik or
    on a parameter move (inf-norm over weight, mu and sigma entries) below
    tol_param, whichever happens first.
    """

    max_iter: int = 2000
    tol_loglik: float = 1e-10
    tol_param: float = 1e-9
    n_restarts: int = 8
    lambda_grid: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    m_step_mode: str = "closed_form_gaussian"  # or "numeric_ascent"
    eig_floor: float = EIG_FLOOR
    scan_init: bool = True
    mstep_iters: int = 50
    ascent_slack: float = 1e-9

    def __post_init__(self):
        if self.m_step_mode not in ("closed_form_gaussian", "numeric_ascent"):
            raise ValueError(f"unknown m_step_mode {self.m_step_mode!r}")


@dataclass
class FitResult:
    params: DeviationParams
    loglik: float
    n_iter: int
    converged: bool
    stop_reason: str
    restart_index: int
    degenerate: bool = False
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        out = self.params.to_dict()
        out.update(
            loglik=self.loglik,
            n_iter=self.n_iter,
            converged=self.converged,
            restart_index=self.restart_index,
        )
        return out


def _canonical_order(data: np.ndarray) -> np.ndarray:
    order = np.lexsort(data.T[::-1])
    return data[order]


def _log_mix(log_h, log_f, w):
    if w <= 0.0:
        return np.maximum(log_h, LOG_PDF_FLOOR)
    if w >= 1.0:
        return np.maximum(log_f, LOG_PDF_FLOOR)
    out = np.logaddexp(np.log1p(-w) + log_h, np.log(w) + log_f)
    return np.maximum(out, LOG_PDF_FLOOR)


def _project_point(model: DeviatedModel, cfg: EmConfig, mu, sigma) -> ParamPoint:
    lo = max(cfg.eig_floor, model.domain.eig_lo)
    domain = model.domain
    if lo != domain.eig_lo:
        domain = replace(domain, eig_lo=lo)
    mu, sigma = domain.project(mu, sigma)
    return ParamPoint(mu, sigma)


def _mstep_closed_form(model, cfg, data, weights, wsum, point):
    mu = (weights @ data) / wsum
    if model.family.free_sigma:
        centered = data - mu
        sigma = (centered.T * weights) @ centered / wsum
    else:
        sigma = model.family.sigma_fixed
    return _project_point(model, cfg, mu, sigma)


def _pack(mu, chol):
    d = mu.size
    idx = np.tril_indices(d)
    entries = chol.copy()
    entries[np.diag_indices(d)] = np.log(np.diag(chol))
    return np.concatenate([mu, entries[idx]])


def _unpack(theta, d):
    mu = theta[:d]
    chol = np.zeros((d, d))
    chol[np.tril_indices(d)] = theta[d:]
    diag = np.exp(np.diag(chol).copy())
    chol[np.diag_indices(d)] = diag
    return mu, chol


def _mstep_numeric(model, cfg, data, weights, wsum, point):
    """Ascend the weighted component log likelihood in (mu, log-Cholesky)."""
    family = model.family
    d = family.dim

    def objective(theta):
        mu, chol = _unpack(theta, d)
        sigma = chol @ chol.T
        sigma = 0.5 * (sigma + sigma.T)
        try:
            p = ParamPoint(mu, sigma)
        except ValueError:
            return -np.inf, None
        return float(weights @ family.log_pdf(data, p)), p

    def gradient(theta):
        mu, chol = _unpack(theta, d)
        sigma = 0.5 * ((chol @ chol.T) + (chol @ chol.T).T)
        p = ParamPoint(mu, sigma)
        gmu, gsigma = family.grad_params(data, p)
        f = np.maximum(family.pdf(data, p), 1e-300)
        glog_mu = weights @ (gmu / f[:, None])
        glog_sigma = np.einsum("n,nij->ij", weights / f, gsigma)
        gchol = sigma_grad_to_logchol(glog_sigma, chol)
        return np.concatenate([glog_mu, gchol[np.tril_indices(d)]])

    theta = _pack(point.mu.copy(), np.linalg.cholesky(point.sigma))
    val, best_point = objective(theta)
    for _ in range(cfg.mstep_iters):
        g = gradient(theta)
        gnorm = float(np.abs(g).max(initial=0.0))
        if not np.isfinite(gnorm) or gnorm < 1e-9 * max(1.0, wsum):
            break
        step = 1.0 / max(1.0, gnorm)
        improved = False
        for _ in range(30):
            cand = theta + step * g
            cand_val, cand_point = objective(cand)
            if cand_val > val + 1e-12:
                theta, val, best_point, improved = cand, cand_val, cand_point, True
                break
            step *= 0.5
        if not improved:
            break
    return _project_point(model, cfg, best_point.mu, best_point.sigma)


def _em_single(model, data, w0, point0, cfg) -> FitResult:
    log_h = model.h0.log_pdf(data)
    family = model.family
    w, point = float(w0), point0
    trace = []
    n_iter = 0
    stop_reason = "max_iter"
    converged = False
    degenerate = False
    mstep = (
        _mstep_closed_form
        if cfg.m_step_mode == "closed_form_gaussian"
        else _mstep_numeric
    )

    for it in range(cfg.max_iter):
        log_f = family.log_pdf(data, point)
        log_p = _log_mix(log_h, log_f, w)
        ll = float(log_p.sum())
        if not np.isfinite(ll):
            raise EstimationError("log likelihood became non-finite during EM")
        if trace and ll < trace[-1] - cfg.ascent_slack:
            # a projected M-step can leave the ascent path; keep the last good iterate
            w, point = prev_w, prev_point
            stop_reason, converged = "ascent_safeguard", True
            break
        if trace and abs(ll - trace[-1]) <= cfg.tol_loglik * max(1.0, abs(trace[-1])):
            trace.append(ll)
            n_iter = it + 1
            stop_reason, converged = "loglik", True
            break
        trace.append(ll)
        n_iter = it + 1

        if w <= 0.0:
            resp = np.zeros_like(log_p)
        elif w >= 1.0:
            resp = np.ones_like(log_p)
        else:
            resp = np.exp(np.log(w) + log_f - log_p)
        wsum = float(resp.sum())
        new_w = min(1.0, max(0.0, wsum / data.shape[0]))
        if wsum < 1e-12:
            w, degenerate = 0.0, True
            stop_reason, converged = "degenerate", True
            break
        prev_w, prev_point = w, point
        new_point = mstep(model, cfg, data, resp, wsum, point)

        move = max(
            abs(new_w - w),
            float(np.abs(new_point.mu - point.mu).max(initial=0.0)),
            float(np.abs(new_point.sigma - point.sigma).max(initial=0.0)),
        )
        w, point = new_w, new_point
        if move <= cfg.tol_param:
            stop_reason, converged = "param", True
            break

    if stop_reason in ("param", "max_iter", "degenerate", "ascent_safeguard"):
        log_f = family.log_pdf(data, point)
        trace.append(float(_log_mix(log_h, log_f, w).sum()))

    params = DeviationParams(w, point)
    return FitResult(
        params=params,
        loglik=float(trace[-1]),
        n_iter=n_iter,
        converged=converged,
        stop_reason=stop_reason,
        restart_index=-1,
        degenerate=degenerate,
        trace=np.asarray(trace),
    )


def _knn_scale(data: np.ndarray, center: np.ndarray, eig_floor: float) -> np.ndarray:
    """Covariance of the k nearest rows to center, k = max(10, n // 20)."""
    n, d = data.shape
    k = min(n, max(10, n // 20))
    dist = np.linalg.norm(data - center, axis=1)
    radius = np.partition(dist, k - 1)[k - 1]
    neighbors = data[dist <= radius]
    if neighbors.shape[0] < 2:
        return np.eye(d)
    sigma = np.atleast_2d(np.cov(neighbors, rowvar=False))
    sigma = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, max(eig_floor, 1e-6), None)
    return (vecs * vals) @ vecs.T


def _scan_candidates(model, data, cfg):
    """Pick a promising 1d starting point by scanning quantile locations."""
    x = data[:, 0]
    levels = np.linspace(0.02, 0.98, 24)
    mus = np.quantile(x, levels)
    q25, q75 = np.quantile(x, [0.25, 0.75])
    spread = (q75 - q25) / 1.349
    if spread <= 0:
        spread = max(float(np.std(x)), 1.0)
    if model.family.free_sigma:
        scales = [(spread / 6.0) ** 2, (spread / 2.0) ** 2]
    else:
        scales = [float(model.family.sigma_fixed[0, 0])]
    log_h = model.h0.log_pdf(data)
    best, best_ll = None, -np.inf
    for s in scales:
        for m in mus:
            point = _project_point(model, cfg, np.array([m]), np.array([[s]]))
            log_f = model.family.log_pdf(data, point)
            ll = float(_log_mix(log_h, log_f, 0.3).sum())
            if ll > best_ll:
                best, best_ll = (0.3, point), ll
    return best


def initial_points(model, data, cfg, rng) -> list[tuple[float, ParamPoint]]:
    """Restart initializers: an optional quantile scan plus randomized starts.

    Randomized starts cycle the weight grid, center mu on a randomly chosen
    data row, and take sigma from the covariance of that row's nearest
    neighbors.  All choices depend on data only through order statistics, so
    shuffling the rows does not change them.
    """
    inits = []
    if cfg.scan_init and model.dim == 1:
        inits.append(_scan_candidates(model, data, cfg))
    streams = rng.spawn(cfg.n_restarts)
    n = data.shape[0]
    for r, stream in enumerate(streams):
        w0 = cfg.lambda_grid[r % len(cfg.lambda_grid)]
        center = data[int(stream.integers(n))]
        if model.family.free_sigma:
            sigma0 = _knn_scale(data, center, cfg.eig_floor)
        else:
            sigma0 = model.family.sigma_fixed
        point = _project_point(model, cfg, center, sigma0)
        inits.append((float(w0), point))
    return inits


def em_fit(
    model: DeviatedModel,
    data,
    cfg: EmConfig = EmConfig(),
    rng=None,
    extra_inits=(),
) -> FitResult:
    """Best-of-restarts EM fit; returns the restart with the highest log likelihood."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.ndim != 2 or data.shape[1] != model.dim:
        raise ValueError(f"data shape {data.shape} does not match model dim {model.dim}")
    if data.shape[0] < 2:
        raise ValueError("need at least two data rows")
    if cfg.m_step_mode == "closed_form_gaussian" and model.family.tag not in _GAUSSIAN_TAGS:
        raise ValueError(
            "closed_form_gaussian M-step requires a Gaussian family; "
            "use m_step_mode='numeric_ascent'"
        )
    data = _canonical_order(data)
    rng = as_generator(rng)

    inits = initial_points(model, data, cfg, rng)
    for w0, point0 in extra_inits:
        inits.append((float(w0), model.family.validate_point(point0)))

    best = None
    failures = []
    for idx, (w0, point0) in enumerate(inits):
        try:
            result = _em_single(model, data, w0, point0, cfg)
        except EstimationError as exc:
            failures.append(f"restart {idx}: {exc}")
            continue
        result.restart_index = idx
        if best is None or result.loglik > best.loglik:
            best = result
    if best is None:
        raise EstimationError("every EM restart failed: " + "; ".join(failures))
    return best


def profile_loglik_lambda(model: DeviatedModel, data, point: ParamPoint, weights) -> np.ndarray:
    """Log likelihood along a weight grid with the bump point held fixed."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0.0) or np.any(weights > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    log_h = model.h0.log_pdf(data)
    log_f = model.family.log_pdf(data, point)
    return np.array([float(_log_mix(log_h, log_f, w).sum()) for w in weights])
