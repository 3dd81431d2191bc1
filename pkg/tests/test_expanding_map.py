import math

import pytest
from hypothesis import given, settings, strategies as st

from lorenzlab.errors import DepthCapError, DomainError, InputError
from lorenzlab.expanding_map import (Interval, LorenzMap, analytic_onto_bound, eval_f,
                                     eval_f_prime, extend_map, iterate_interval, max_extension,
                                     onto_certificate, validate_map)
from lorenzlab.params import DEFAULT_PARAMS, SQRT2, ModelParams

# 40-digit values of the closed forms, computed once with mpmath
F_HALF = 0.15947693712765304005
F_01 = -0.65323551504241005376
F_02 = -0.41681397532372398865
F_102 = 0.97917747760740844193
FP_HALF = 1.7392154056914795601
MAX_EPS = 0.034333313178575927692

# below |x| ~ 1e-21 the value mu |x|^rho - 1 rounds to exactly -1 in double precision
nonzero = st.floats(-1.0, 1.0).filter(lambda x: abs(x) > 1e-20)


def test_eval_f_examples(params):
    assert eval_f(params, 0.5) == pytest.approx(F_HALF, abs=1e-15)
    assert eval_f(params, 1.0) == pytest.approx(0.95, abs=1e-15)
    assert eval_f(params, -0.5) == -eval_f(params, 0.5)
    with pytest.raises(DomainError):
        eval_f(params, 0.0)


def test_eval_f_prime_examples(params):
    assert eval_f_prime(params, 1.0) == pytest.approx(1.4625, abs=1e-15)
    assert eval_f_prime(params, 0.5) == pytest.approx(FP_HALF, rel=1e-14)
    assert eval_f_prime(params, 1e-8) > 1e2
    with pytest.raises(DomainError):
        eval_f_prime(params, 0.0)


@given(nonzero)
def test_range_and_slope(x):
    assert -1.0 < eval_f(DEFAULT_PARAMS, x) < 1.0
    assert eval_f_prime(DEFAULT_PARAMS, x) > SQRT2 + 1e-12


@given(nonzero)
def test_odd_symmetry(x):
    assert eval_f(DEFAULT_PARAMS, -x) == -eval_f(DEFAULT_PARAMS, x)


def test_validate_map_examples():
    rep = validate_map(DEFAULT_PARAMS)
    assert rep.valid and rep.min_slope == pytest.approx(1.4625, abs=1e-15)
    bad = validate_map(DEFAULT_PARAMS.replace(mu=1.0))
    assert not bad.valid and bad.min_slope == pytest.approx(0.75)
    assert not bad.check("slope_gt_sqrt2").passed
    over = validate_map(DEFAULT_PARAMS.replace(mu=2.1))
    assert not over.check("image_in_(-1,1)").passed


def test_non_finite_rejected():
    with pytest.raises(InputError):
        ModelParams(mu=float("nan"))


def test_iterate_interval_examples(params):
    d = iterate_interval(params, Interval(-1.0, 1.0), 1)
    assert d.cuts == [0.0]
    assert d.branches[0].image == pytest.approx((-0.95, 1.0))
    assert d.branches[0].image[1] == 1.0 and d.branches[1].image[0] == -1.0
    assert d.branches[1].image == pytest.approx((-1.0, 0.95))
    d = iterate_interval(params, Interval(0.1, 0.2), 1)
    assert d.cuts == []
    assert d.branches[0].image == pytest.approx((F_01, F_02), abs=1e-15)
    with pytest.raises(InputError):
        Interval(0.2, 0.1)



def _snap(x):
    # keep endpoints off the floating-point collapse next to 0
    return 0.0 if abs(x) < 1e-9 else x


intervals = st.tuples(st.floats(-0.99, 0.99), st.floats(1e-3, 0.3)).map(
    lambda t: (_snap(t[0]), min(_snap(t[0] + t[1]), 1.0)))


@settings(max_examples=40, deadline=None)
@given(intervals, st.integers(1, 8))
def test_branch_decomposition_exact(J, n):
    fmap = LorenzMap(DEFAULT_PARAMS)
    lam0 = DEFAULT_PARAMS.lambda0
    dec = iterate_interval(fmap, Interval(*J), n)
    for br in dec.branches:
        a, b = br.domain
        c, d = br.image
        mid = fmap.compose(br.word, 0.5 * (a + b))
        assert c < mid < d
        assert d - c >= lam0 ** n * (b - a) * (1 - 1e-9)
    for t in dec.cuts:
        x, hit = t, False
        for _ in range(n):
            if abs(x) <= 1e-9:
                hit = True
                break
            x = fmap.f(x)
        assert hit
    more = iterate_interval(fmap, Interval(*J), n + 1)
    for t in dec.cuts:
        assert min(abs(t - u) for u in more.cuts) <= 1e-15


@settings(max_examples=30, deadline=None)
@given(intervals)
def test_counting_bound(J):
    # the bound is derived for J off the stable leaf under "no component has
    # covered (-1, 1) yet", so it constrains the depths 2n below the first cover
    if J[0] < 0.0 < J[1]:
        return
    N = onto_certificate(DEFAULT_PARAMS, J).N
    for n in range(1, 6):
        if 2 * n >= N:
            break
        assert len(iterate_interval(DEFAULT_PARAMS, Interval(*J), 2 * n).cuts) <= 2 ** n - 1


def test_onto_examples(params):
    assert onto_certificate(params, (-1.0, 1.0)).N == 0
    cert = onto_certificate(params, (0.10, 0.11))
    assert cert.N <= 25
    assert cert.N <= analytic_onto_bound(params, 0.01)
    assert cert.branches[0].image[0] <= -1.0 and cert.branches[-1].image[1] >= 1.0
    tiny = onto_certificate(params, (0.2699 - 1e-6, 0.2699 + 1e-6))
    assert 0 < tiny.N <= 64
    d = cert.to_dict()
    assert set(d) >= {"N", "branches", "params_hash"}


def test_onto_depth_cap(params):
    with pytest.raises(DepthCapError) as exc:
        onto_certificate(params, (0.2699, 0.2699 + 1e-9), depth_cap=3)
    assert "cut_counts" in exc.value.diagnostic


@settings(max_examples=25, deadline=None)
@given(intervals, st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_onto_monotone_in_J(J, grow_lo, grow_hi):
    lo, hi = J
    if lo < 0.0 < hi:
        return
    inner = onto_certificate(DEFAULT_PARAMS, J).N
    side = (-1.0, 0.0) if hi <= 0 else (0.0, 1.0)
    outer = (max(side[0], lo - grow_lo), min(side[1], hi + grow_hi))
    assert onto_certificate(DEFAULT_PARAMS, outer).N <= inner


def test_extend_map(params):
    ext = extend_map(params)
    assert ext.extended and ext.domain == (-1.02, 1.02)
    assert eval_f(params, 1.02) == pytest.approx(F_102, abs=1e-15)
    with pytest.raises(InputError, match="0.0343"):
        extend_map(params.replace(eps_ext=0.05))
    assert max_extension(params) == pytest.approx(MAX_EPS, rel=1e-13)
    assert extend_map(params.replace(eps_ext=0.0)).domain == (-1.0, 1.0)
