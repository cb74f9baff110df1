"""Loss functionals between two-atom mixing configurations.

A configuration G = (w, mu, sigma) is identified with the two-atom measure
(1 - w) * delta_(mu0, sigma0) + w * delta_(mu, sigma) over the location-scale
parameter space, where (mu0, sigma0) is the fixed anchor of the reference
density.  Throughout, the norm on a (vector, matrix) pair is
sqrt(|mu|_2^2 + |sigma|_F^2); matrix norms are Frobenius.

wasserstein_two_atom returns the r-th power W_r^r of the order-r Wasserstein
distance between the two measures, in closed form.  transport_oracle computes
the same quantity by direct minimization over the one-parameter family of
2x2 couplings, and exists purely to cross-check the closed form.
"""

from __future__ import annotations

import numpy as np

from .kernels import ParamPoint
from .model import DeviationParams


def pair_norm(dmu, dsigma) -> float:
    """Norm of a (mu, sigma) displacement: sqrt(|dmu|^2 + |dsigma|_F^2)."""
    dmu = np.asarray(dmu, dtype=float)
    dsigma = np.asarray(dsigma, dtype=float)
    return float(np.sqrt(np.sum(dmu**2) + np.sum(dsigma**2)))


def _check(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint):
    if not (g.point.dim == g_star.point.dim == anchor.dim):
        raise ValueError("g, g_star and anchor must share one dimension")


def _displacements(g, g_star, anchor):
    delta = pair_norm(g.mu - anchor.mu, g.sigma - anchor.sigma)
    delta_star = pair_norm(g_star.mu - anchor.mu, g_star.sigma - anchor.sigma)
    cross = pair_norm(g.mu - g_star.mu, g.sigma - g_star.sigma)
    return delta, delta_star, cross


def loss_K(g: DeviationParams, g_star: DeviationParams) -> float:
    """First-order loss |w - w*| + (w + w*) |(mu, sigma) - (mu*, sigma*)|."""
    if g.point.dim != g_star.point.dim:
        raise ValueError("g and g_star must share one dimension")
    cross = pair_norm(g.mu - g_star.mu, g.sigma - g_star.sigma)
    return abs(g.weight - g_star.weight) + (g.weight + g_star.weight) * cross


def loss_D(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint) -> float:
    """Anchored second-order loss with squared displacements from the anchor."""
    _check(g, g_star, anchor)
    w, ws = g.weight, g_star.weight
    delta, delta_star, cross = _displacements(g, g_star, anchor)
    return (
        w * delta**2
        + ws * delta_star**2
        - min(w, ws) * (delta**2 + delta_star**2)
        + (w * delta + ws * delta_star) * cross
    )


def loss_Dbar(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint) -> float:
    """Companion of loss_D with the product form in its first term."""
    _check(g, g_star, anchor)
    w, ws = g.weight, g_star.weight
    delta, delta_star, cross = _displacements(g, g_star, anchor)
    return abs(w - ws) * delta * delta_star + (w * delta + ws * delta_star) * cross


def _fourth_order_parts(point: ParamPoint, anchor: ParamPoint):
    dmu = float(np.sum((point.mu - anchor.mu) ** 2))  # |dmu|^2
    dsig = float(np.sqrt(np.sum((point.sigma - anchor.sigma) ** 2)))  # |dsigma|_F
    return dmu**2 + dsig**2, dmu + dsig  # (|dmu|^4 + |dsigma|^2, |dmu|^2 + |dsigma|)


def loss_Q(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint) -> float:
    """Fourth-order loss used when the bump family loses strong identifiability."""
    _check(g, g_star, anchor)
    w, ws = g.weight, g_star.weight
    quart, lin = _fourth_order_parts(g.point, anchor)
    quart_star, lin_star = _fourth_order_parts(g_star.point, anchor)
    mu_gap = float(np.sum((g.mu - g_star.mu) ** 2))
    sig_gap = float(np.sqrt(np.sum((g.sigma - g_star.sigma) ** 2)))
    return (
        w * quart
        + ws * quart_star
        - min(w, ws) * (quart + quart_star)
        + (w * lin + ws * lin_star) * (mu_gap + sig_gap)
    )


def loss_Qprime(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint) -> float:
    """Variant of loss_Q whose middle term measures the gap between the atoms."""
    _check(g, g_star, anchor)
    w, ws = g.weight, g_star.weight
    quart, _ = _fourth_order_parts(g.point, anchor)
    quart_star, _ = _fourth_order_parts(g_star.point, anchor)
    mu_gap = float(np.sum((g.mu - g_star.mu) ** 2))
    sig_gap = float(np.sqrt(np.sum((g.sigma - g_star.sigma) ** 2)))
    gap_quart = mu_gap**2 + sig_gap**2
    return (
        w * quart
        + min(w, ws) * gap_quart
        + ws * quart_star
        - min(w, ws) * (quart + quart_star)
    )


def _check_order(r) -> float:
    r = float(r)
    if r < 1.0:
        raise ValueError("order r must be >= 1")
    return r


def loss_Dr(g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint, r=2.0) -> float:
    """Order-r anchored loss; coincides with W_r^r when displacements dominate."""
    _check(g, g_star, anchor)
    r = _check_order(r)
    w, ws = g.weight, g_star.weight
    delta, delta_star, cross = _displacements(g, g_star, anchor)
    return (
        w * delta**r
        + ws * delta_star**r
        - min(w, ws) * (delta**r + delta_star**r - cross**r)
    )


def wasserstein_two_atom(
    g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint, r=2.0
) -> float:
    """W_r^r between the two-atom measures of g and g_star, in closed form."""
    _check(g, g_star, anchor)
    r = _check_order(r)
    w, ws = g.weight, g_star.weight
    delta, delta_star, cross = _displacements(g, g_star, anchor)
    if delta**r + delta_star**r >= cross**r:
        return loss_Dr(g, g_star, anchor, r)
    if w + ws <= 1.0:
        return w * delta**r + ws * delta_star**r
    return (
        (1.0 - ws) * delta**r
        + (1.0 - w) * delta_star**r
        + (w + ws - 1.0) * cross**r
    )


def transport_oracle(
    g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint, r=2.0
) -> float:
    """W_r^r by direct minimization over 2x2 couplings.

    A coupling of the two-atom measures has one free mass s, placed on the
    (bump, bump*) cell, with s in [max(0, w + w* - 1), min(w, w*)].  The cost
    is affine in s, so the minimum sits at one of the two endpoints.
    """
    _check(g, g_star, anchor)
    r = _check_order(r)
    w, ws = g.weight, g_star.weight
    delta, delta_star, cross = _displacements(g, g_star, anchor)
    s_lo = max(0.0, w + ws - 1.0)
    s_hi = min(w, ws)
    base = w * delta**r + ws * delta_star**r
    slope = cross**r - delta**r - delta_star**r
    return min(base + s_lo * slope, base + s_hi * slope)


def measures_coincide(
    g: DeviationParams, g_star: DeviationParams, anchor: ParamPoint, tol: float = 0.0
) -> bool:
    """Whether g and g_star define the same two-atom measure over parameters."""
    _check(g, g_star, anchor)
    w = 0.0 if g.point.close_to(anchor, tol) else g.weight
    ws = 0.0 if g_star.point.close_to(anchor, tol) else g_star.weight
    if abs(w - ws) > tol:
        return False
    if w <= tol and ws <= tol:
        return True
    return g.point.close_to(g_star.point, tol)
