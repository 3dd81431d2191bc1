import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenzlab.connecting import (PerturbationParams, connect, connect_to_orbit, eval_f_s,
                                  loop_family_csv, loop_periodic_family, replay,
                                  slope_floor_scan, track_curve, validate_family)
from lorenzlab.errors import DepthCapError, EmptyFamilyError, InputError
from lorenzlab.expanding_map import eval_f, validate_map
from lorenzlab.params import DEFAULT_PARAMS, SQRT2

X_RL = 0.26986979198065336794
TAU_DEFAULT = 0.0325 * 0.05 / 1.5
TAU_SQRT2 = (1.4625 - SQRT2) * 0.05 / 1.5


@pytest.fixture(scope="module")
def plus():
    return PerturbationParams(side="+")


@pytest.fixture(scope="module")
def loop(plus):
    return connect(plus, 0.0)


@given(st.floats(-1.0, 1.0).filter(lambda x: abs(x) > 1e-20))
def test_identity_at_zero(x):
    pert = PerturbationParams()
    assert eval_f_s(pert, 0.0, x) == eval_f(DEFAULT_PARAMS, x)


@settings(max_examples=50)
@given(st.floats(0.0, TAU_DEFAULT), st.floats(-0.95 + 1e-9, 1.0).filter(lambda x: abs(x) > 1e-20))
def test_bump_support(s, x):
    pert = PerturbationParams()
    assert eval_f_s(pert, s, x) == eval_f(DEFAULT_PARAMS, x)


def test_start_value(plus):
    for s in (0.0, 1e-4, TAU_DEFAULT):
        assert eval_f_s(plus, s, -1.0) == pytest.approx(-0.95 + s, abs=1e-15)
    minus = PerturbationParams(side="-")
    assert eval_f_s(minus, 1e-4, 1.0) == pytest.approx(0.95 - 1e-4, abs=1e-15)


def test_tau_max_closed_forms(plus):
    assert validate_family(plus).tau_max == pytest.approx(TAU_DEFAULT, rel=1e-12)
    assert validate_family(plus).validity.valid
    edge = PerturbationParams(lambda_margin=SQRT2)
    assert validate_family(edge).tau_max == pytest.approx(TAU_SQRT2, rel=1e-12)
    assert validate_family(edge).tau_max == pytest.approx(0.00161, abs=5e-6)
    wide = PerturbationParams(eta=0.1)
    assert validate_family(wide).tau_max == pytest.approx(2 * TAU_DEFAULT, rel=1e-12)
    with pytest.raises(EmptyFamilyError):
        validate_family(PerturbationParams(lambda_margin=1.4625))
    with pytest.raises(InputError):
        PerturbationParams(lambda_margin=1.4)


def test_slope_floor(plus):
    assert slope_floor_scan(plus) >= plus.lambda_margin


def test_curve_depth_zero(plus):
    c = track_curve(plus, 0)
    assert len(c.branches) == 1 and c.cuts == []
    assert c.branches[0].values == pytest.approx((-0.95, -0.95 + TAU_DEFAULT), abs=1e-15)
    with pytest.raises(InputError):
        track_curve(plus, -1)
    with pytest.raises(DepthCapError):
        track_curve(plus, 70)


@pytest.mark.parametrize("side", ["+", "-"])
def test_curve_invariants(side):
    pert = PerturbationParams(side=side)
    prev = None
    for n in range(0, 19):
        c = track_curve(pert, n)
        if n % 2 == 0 and n:
            assert len(c.branches) <= 2 ** (n // 2)
        assert min(c.expansion_ratios()) >= 0.95
        assert c.monotone_certificate(pert, samples=4)
        if prev is not None:
            # cuts born at this depth sit where gamma_{n-1} crosses 0: limits are +-1
            for left, right in zip(c.branches, c.branches[1:]):
                if all(abs(right.s_lo - t) > 0 for t in prev.cuts):
                    assert {left.values[1], right.values[0]} == {-1.0, 1.0}
        prev = c
    assert len(c.cuts) > 0


def _mp_gamma(side, eta, s, n):
    """Plain mpmath iteration of the bumped map from the start point."""
    with mpmath.workdps(50):
        mu, rho = mpmath.mpf("1.95"), mpmath.mpf("0.75")
        s, eta = mpmath.mpf(s), mpmath.mpf(eta)
        start = -1 if side == "+" else 1

        def f_s(x):
            v = mpmath.sign(x) * (mu * abs(x) ** rho - 1)
            u = (x + 1) / eta if side == "+" else (1 - x) / eta
            if 0 <= u <= 1:
                v += (1 if side == "+" else -1) * s * (1 - (3 * u ** 2 - 2 * u ** 3))
            return v

        x = f_s(mpmath.mpf(start))
        for _ in range(n):
            x = f_s(x)
        return float(x)


@pytest.mark.parametrize("target", [0.0, X_RL, -0.5])
def test_connect(plus, target):
    res = connect(plus, target)
    assert res.residual <= 1e-10 and res.n <= 64
    assert abs(replay(plus, res.s_star, res.n) - target) <= 1e-10
    assert abs(_mp_gamma("+", plus.eta, res.s_star, res.n) - target) <= 1e-10
    assert res.valid and validate_map(plus.map_at(res.s_star)).valid
    assert 0.0 <= res.s_star <= plus.tau_value()
    assert res.min_expansion_ratio >= 0.95


def test_connect_minus_mirrors_plus(plus, loop):
    res = connect(PerturbationParams(side="-"), 0.0)
    assert res.n == loop.n and res.s_star == pytest.approx(loop.s_star, rel=1e-12)
    assert abs(_mp_gamma("-", 0.05, res.s_star, res.n)) <= 1e-10


def test_connect_contract(plus):
    loose = connect(plus, 0.3, tol=2.0)
    assert loose.n == 0 and loose.residual <= 2.0
    for bad in (1.0, -1.0, 2.0):
        with pytest.raises(InputError):
            connect(plus, bad)
    with pytest.raises(InputError):
        connect(plus, 0.1, tol=0.0)
    with pytest.raises(DepthCapError):
        connect(plus, 0.0, depth_cap=3)


def test_connect_to_orbit(plus):
    res = connect_to_orbit(plus, "RL")
    assert abs(abs(res.target) - X_RL) <= 1e-12 and res.residual <= 1e-10


def test_loop_family(plus, loop):
    fam = loop_periodic_family(plus, loop.s_star, loop.n, count=3)
    assert len(fam) == 3
    for a, b in zip(fam, fam[1:]):
        assert b.log10_closest < a.log10_closest
        assert b.d_sigma < a.d_sigma
        assert b.log10_hausdorff < a.log10_hausdorff
    assert all(abs(o.s - loop.s_star) < 1e-6 for o in fam)
    rows = loop_family_csv(fam).splitlines()
    assert rows[0] == "word,period,log10_closest_approach,d_to_delta_sigma,log10_hausdorff"
    assert len(rows) == 4
    with pytest.raises(InputError):
        loop_periodic_family(plus, loop.s_star, loop.n, count=0)
