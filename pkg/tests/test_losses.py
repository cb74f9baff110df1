"""Loss functional checks against hand-computed values and couplings.

The frozen values below were worked out on paper from the definitions, using
a 3-4-5 displacement triangle so every intermediate quantity is exact:

    anchor (mu0, sigma0) = (0, 1)
    g      = (w 0.6, mu 3, sigma 1)   ->  Delta  = 3   (|3-0|, |1-1|)
    g_star = (w 0.2, mu 0, sigma 5)   ->  Delta* = 4   (|0-0|, |5-1|)
    cross  = |(3, -4)| = 5

    K  = 0.4 + 0.8 * 5                                    = 4.4
    D  = 0.6*9 + 0.2*16 - 0.2*25 + (1.8 + 0.8)*5          = 16.6
    Db = 0.4*12 + 2.6*5                                   = 17.8
    Q  = 0.6*81 + 0.2*16 - 0.2*97 + (0.6*9 + 0.2*4)*13    = 113.0
    Q' = 0.6*81 + 0.2*97 + 0.2*16 - 0.2*97                = 51.8
    D1 = 1.8 + 0.8 - 0.2*(3 + 4 - 5)                      = 2.2
    D2 = 5.4 + 3.2 - 0.2*(9 + 16 - 25)                    = 8.6
"""

import numpy as np
import pytest

from deviate.kernels import GaussianFamily, ParamPoint
from deviate.losses import (
    loss_D,
    loss_Dbar,
    loss_Dr,
    loss_K,
    loss_Q,
    loss_Qprime,
    measures_coincide,
    pair_norm,
    transport_oracle,
    wasserstein_two_atom,
)
from deviate.model import DeviationParams

ANCHOR = ParamPoint(0.0, 1.0)
G = DeviationParams(0.6, ParamPoint(3.0, 1.0))
G_STAR = DeviationParams(0.2, ParamPoint(0.0, 5.0))


def random_pair(rng, dim=1):
    def config():
        w = rng.uniform(0.0, 1.0)
        mu = rng.uniform(-3.0, 3.0, size=dim)
        a = rng.uniform(-0.8, 0.8, size=(dim, dim))
        sigma = a @ a.T + rng.uniform(0.2, 2.0) * np.eye(dim)
        return DeviationParams(w, ParamPoint(mu, sigma))

    anchor_mu = rng.uniform(-1.0, 1.0, size=dim)
    anchor = ParamPoint(anchor_mu, np.eye(dim) * rng.uniform(0.5, 1.5))
    return config(), config(), anchor


def test_hand_computed_values():
    assert loss_K(G, G_STAR) == pytest.approx(4.4, abs=1e-12)
    assert loss_D(G, G_STAR, ANCHOR) == pytest.approx(16.6, abs=1e-12)
    assert loss_Dbar(G, G_STAR, ANCHOR) == pytest.approx(17.8, abs=1e-12)
    assert loss_Q(G, G_STAR, ANCHOR) == pytest.approx(113.0, abs=1e-12)
    assert loss_Qprime(G, G_STAR, ANCHOR) == pytest.approx(51.8, abs=1e-12)
    assert loss_Dr(G, G_STAR, ANCHOR, r=1) == pytest.approx(2.2, abs=1e-12)
    assert loss_Dr(G, G_STAR, ANCHOR, r=2) == pytest.approx(8.6, abs=1e-12)
    # 3-4-5 displacements sit exactly on the W = D_r branch boundary at r = 2
    assert wasserstein_two_atom(G, G_STAR, ANCHOR, r=1) == pytest.approx(2.2, abs=1e-12)
    assert wasserstein_two_atom(G, G_STAR, ANCHOR, r=2) == pytest.approx(8.6, abs=1e-12)


def test_wasserstein_branch_cases():
    # atoms further from each other than from the anchor, light total weight:
    # optimal coupling routes all bump mass through the anchor atom
    g = DeviationParams(0.3, ParamPoint(1.0, 1.0))
    gs = DeviationParams(0.4, ParamPoint(-1.0, 1.0))
    assert wasserstein_two_atom(g, gs, ANCHOR, r=2) == pytest.approx(0.7, abs=1e-12)
    assert loss_Dr(g, gs, ANCHOR, r=2) == pytest.approx(1.3, abs=1e-12)
    # heavy total weight forces w + w* - 1 of direct bump-to-bump transport
    g = DeviationParams(0.7, ParamPoint(1.0, 1.0))
    gs = DeviationParams(0.8, ParamPoint(-1.0, 1.0))
    assert wasserstein_two_atom(g, gs, ANCHOR, r=2) == pytest.approx(2.5, abs=1e-12)


def test_pair_norm_is_euclidean_on_both_blocks():
    assert pair_norm([3.0], [[4.0]]) == 5.0
    assert pair_norm([1.0, 2.0], [[2.0, 0.0], [0.0, 4.0]]) == 5.0


def test_symmetry_and_identity():
    rng = np.random.default_rng(42)
    for _ in range(200):
        g, gs, anchor = random_pair(rng)
        assert loss_K(g, gs) == pytest.approx(loss_K(gs, g), rel=1e-12)
        assert loss_D(g, gs, anchor) == pytest.approx(loss_D(gs, g, anchor), rel=1e-12)
        assert wasserstein_two_atom(g, gs, anchor, 2) == pytest.approx(
            wasserstein_two_atom(gs, g, anchor, 2), rel=1e-12
        )
        assert loss_K(g, g) == 0.0
        assert loss_D(g, g, anchor) == 0.0
        assert wasserstein_two_atom(g, g, anchor, 2) == 0.0


def test_losses_vanish_only_when_measures_coincide():
    # same two-atom measure written two ways: zero bump weight vs a bump
    # parked exactly on the anchor
    at_anchor = DeviationParams(0.4, ParamPoint(0.0, 1.0))
    no_bump = DeviationParams(0.0, ParamPoint(2.0, 1.0))
    assert measures_coincide(at_anchor, no_bump, ANCHOR)
    assert wasserstein_two_atom(at_anchor, no_bump, ANCHOR, 2) == 0.0
    assert loss_D(at_anchor, no_bump, ANCHOR) == 0.0
    moved = DeviationParams(0.4, ParamPoint(0.5, 1.0))
    assert not measures_coincide(moved, no_bump, ANCHOR)
    assert wasserstein_two_atom(moved, no_bump, ANCHOR, 2) > 0.0


def test_d_and_dbar_are_two_sided_comparable():
    rng = np.random.default_rng(7)
    worst_lo, worst_hi = np.inf, 0.0
    for k in range(10000):
        g, gs, anchor = random_pair(rng, dim=1 if k % 3 else 2)
        d = loss_D(g, gs, anchor)
        dbar = loss_Dbar(g, gs, anchor)
        if dbar <= 1e-12:
            continue
        ratio = d / dbar
        worst_lo, worst_hi = min(worst_lo, ratio), max(worst_hi, ratio)
    assert worst_lo >= 0.5 - 1e-12, f"D/Dbar fell to {worst_lo}"
    assert worst_hi <= 2.0 + 1e-12, f"D/Dbar rose to {worst_hi}"


def test_closed_form_matches_transport_oracle():
    rng = np.random.default_rng(11)
    for k in range(10000):
        g, gs, anchor = random_pair(rng, dim=1 if k % 2 else 2)
        r = (1.0, 2.0, 3.0, 4.0)[k % 4]
        closed = wasserstein_two_atom(g, gs, anchor, r)
        direct = transport_oracle(g, gs, anchor, r)
        assert abs(closed - direct) < 1e-10, (k, r, closed, direct)


def test_wasserstein_is_dominated_by_dr_within_constants():
    rng = np.random.default_rng(13)
    lo = np.inf
    for _ in range(10000):
        g, gs, anchor = random_pair(rng)
        dr = loss_Dr(g, gs, anchor, 2.0)
        w = wasserstein_two_atom(g, gs, anchor, 2.0)
        if dr <= 1e-12:
            assert w <= 1e-12
            continue
        ratio = w / dr
        assert ratio <= 1.0 + 1e-12
        lo = min(lo, ratio)
    assert lo > 0.0
    print(f"\nW_2^2 / D_2 over random pairs: min {lo:.6f}, max 1.0")


def test_q_dominates_qprime_up_to_constant():
    rng = np.random.default_rng(17)
    lo = np.inf
    for _ in range(10000):
        g, gs, anchor = random_pair(rng)
        q = loss_Q(g, gs, anchor)
        qp = loss_Qprime(g, gs, anchor)
        if qp <= 1e-12:
            continue
        lo = min(lo, q / qp)
    assert lo > 0.0
    print(f"\nQ / Q' over random pairs: min {lo:.6f}")


def test_order_validation():
    with pytest.raises(ValueError):
        loss_Dr(G, G_STAR, ANCHOR, r=0.5)
    with pytest.raises(ValueError):
        wasserstein_two_atom(G, G_STAR, ANCHOR, r=0.0)
    with pytest.raises(ValueError):
        loss_K(G, DeviationParams(0.5, ParamPoint([0.0, 0.0], np.eye(2))))
