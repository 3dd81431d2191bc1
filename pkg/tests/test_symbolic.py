import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenzlab.errors import InadmissibleWordError, InputError, NoPeriodicPointError
from lorenzlab.expanding_map import LorenzMap
from lorenzlab.params import DEFAULT_PARAMS
from lorenzlab.symbolic import (build_horseshoe, cylinder_of, find_periodic, flip,
                                homoclinic_witness, horseshoe_point, itinerary_of, kneading,
                                cycle_residual, periodic_residuals, verify_witness)

# mpmath oracles (40 digits): bisection of mu x^rho + x = 1 and of f^3(x) = x
X_RL = 0.26986979198065336794
Y_RL = 0.44195317028761341782   # c / (1 + b x^2), the 2-cycle linear solve
PERIOD_RL = 3.3098156882281260093
MULT_RL = 4.1173199098089276218
X_RLL = 0.11646680907189342104
MULT_RLL = 7.8847657454586187945
PERIOD_RLL = 4.8489812214383935340
CYL_RL_HI = 0.41047544735635613721  # mu^(-1/rho)
K_PLUS_20 = "LLLLLLRLLRRLLRLRRRRL"

words = st.text(alphabet="LR", min_size=1, max_size=8)


def _oracle_rl():
    with mpmath.workdps(40):
        mu, rho = mpmath.mpf("1.95"), mpmath.mpf("0.75")
        x = mpmath.findroot(lambda t: mu * t ** rho + t - 1, (0.1, 0.5), solver="bisect")
        return float(x)


def test_itinerary_examples(params):
    assert itinerary_of(params, 0.5, 4).word == "RRLL"
    assert itinerary_of(params, -0.5, 4).word == "LLRR"
    assert itinerary_of(params, X_RL, 2).word == "RL"
    it = itinerary_of(params, 1e-15, 3)
    assert it.hit_zero and it.word == ""


def test_kneading(params):
    k = kneading(params, 20)
    assert k.kPlus == K_PLUS_20
    assert k.kMinus == flip(k.kPlus)


def test_cylinder_examples(params):
    r = cylinder_of(params, "R")
    assert (r.lo, r.hi) == (0.0, 1.0)
    rl = cylinder_of(params, "RL")
    assert rl.lo == 0.0 and rl.hi == pytest.approx(CYL_RL_HI, rel=1e-14)
    assert cylinder_of(params, "R" * 7) is None
    with pytest.raises(InputError):
        cylinder_of(params, "")


@settings(max_examples=40, deadline=None)
@given(words)
def test_cylinder_consistency(w):
    cyl = cylinder_of(DEFAULT_PARAMS, w)
    if cyl is None:
        return
    rng = np.random.default_rng(len(w))
    for u in rng.uniform(0.01, 0.99, 100):
        x = cyl.lo + u * (cyl.hi - cyl.lo)
        it = itinerary_of(DEFAULT_PARAMS, x, len(w))
        if not it.hit_zero:
            assert it.word == w


def test_find_periodic_rl(params):
    orb = find_periodic(params, "RL")
    assert _oracle_rl() == pytest.approx(X_RL, abs=1e-15)
    assert abs(orb.point.x - X_RL) <= 1e-10
    assert abs(orb.point.y - Y_RL) <= 1e-10
    assert abs(orb.points[1].x + X_RL) <= 1e-10 and abs(orb.points[1].y + Y_RL) <= 1e-10
    assert orb.period == pytest.approx(2 + math.log(1 / X_RL), abs=1e-10)
    assert orb.period == pytest.approx(PERIOD_RL, abs=1e-12)
    assert orb.multiplier == pytest.approx(MULT_RL, rel=1e-12)
    point, mult = orb
    assert point is orb.point and mult == orb.multiplier


def test_find_periodic_rll(params):
    orb = find_periodic(params, "RLL")
    assert orb.point.x == pytest.approx(X_RLL, abs=1e-13)
    assert orb.multiplier == pytest.approx(MULT_RLL, rel=1e-12)
    assert orb.period == pytest.approx(PERIOD_RLL, abs=1e-12)


def test_find_periodic_errors(params):
    with pytest.raises(NoPeriodicPointError):
        find_periodic(params, "R")
    with pytest.raises(InadmissibleWordError):
        find_periodic(params, "RRRRRRRR")
    again = find_periodic(params, "RLRL")
    assert again.point.x == pytest.approx(X_RL, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(words)
def test_periodic_properties(w):
    try:
        orb = find_periodic(DEFAULT_PARAMS, w)
    except (InadmissibleWordError, NoPeriodicPointError):
        return
    rx, ry = periodic_residuals(DEFAULT_PARAMS, orb)
    assert rx <= 1e-10 and ry <= 1e-10
    assert orb.multiplier >= DEFAULT_PARAMS.lambda0 ** len(w) * (1 - 1e-12)
    mirror = find_periodic(DEFAULT_PARAMS, flip(w))
    for p, q in zip(orb.points, mirror.points):
        assert q.x == pytest.approx(-p.x, abs=1e-12) and q.y == pytest.approx(-p.y, abs=1e-12)


def test_long_word_by_contraction(params):
    w = "RL" * 30 + "RLL"
    orb = find_periodic(params, w)
    assert cycle_residual(params, orb) <= 1e-13
    assert periodic_residuals(params, orb)[1] <= 1e-10
    assert orb.multiplier >= params.lambda0 ** len(w)


def test_horseshoe(params):
    cert = build_horseshoe(params, "RL", "RLL")
    assert cert.I_p[1] < cert.I_q[0] or cert.I_q[1] < cert.I_p[0]
    assert cert.I_p[0] <= X_RL <= cert.I_p[1]
    assert cert.I_q[0] <= X_RLL <= cert.I_q[1]
    lo, hi = min(cert.I_p[0], cert.I_q[0]), max(cert.I_p[1], cert.I_q[1])
    for img in (cert.image_p, cert.image_q):
        assert img[0] <= lo and img[1] >= hi
    with pytest.raises(InputError):
        build_horseshoe(params, "RL", "RL")
    wider = build_horseshoe(params, "RL", "RLL", k_p=2, k_q=1)
    assert wider.I_p[1] - wider.I_p[0] < cert.I_p[1] - cert.I_p[0]


def test_horseshoe_property(params):
    cert = build_horseshoe(params, "RL", "RLL")
    fmap = LorenzMap(params)
    rng = np.random.default_rng(7)
    blocks = cert.blocks()
    ivs = (cert.I_p, cert.I_q)
    for _ in range(1000):
        seq = list(rng.integers(0, 2, 6))
        x = horseshoe_point(params, cert, seq)
        # follows the block sequence; only the first blocks are checked, since
        # expansion by ~lambda^len amplifies rounding further along
        for s in seq[:3]:
            assert ivs[s][0] - 1e-12 <= x <= ivs[s][1] + 1e-12
            assert itinerary_of(params, x, len(blocks[s])).word == blocks[s]
            x = fmap.compose(blocks[s], x)


def test_homoclinic_witness(params):
    w = homoclinic_witness(params, "RL", "RLL")
    assert w.n > 0 and w.residual <= 1e-10
    assert verify_witness(params, w.x_star, w.n, w.target)
    back = homoclinic_witness(params, "RLL", "RL")
    assert back.residual <= 1e-10
    self_w = homoclinic_witness(params, "RL", "RL")
    assert self_w.x_star != X_RL and self_w.residual <= 1e-10
    assert verify_witness(params, X_RL, 2, X_RL)
