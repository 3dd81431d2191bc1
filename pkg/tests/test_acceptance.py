"""The twelve acceptance criteria, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line (printed with ``-s`` and repeated in the
terminal summary).  A criterion that fails is reported as failed, not skipped.
"""

import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from lorenzlab.cli import COMMANDS
from lorenzlab.connecting import (PerturbationParams, connect, isolation_report,
                                  loop_periodic_family, track_curve)
from lorenzlab.expanding_map import Interval, iterate_interval, onto_certificate, validate_map
from lorenzlab.measures import (approximate_by_periodic, entropy_of, measure_path,
                                periodic_flow_measure, periodic_trace_integrals,
                                random_empirical_measure, weak_star_distance)
from lorenzlab.params import CONE_ALPHA, DEFAULT_PARAMS, SQRT2
from lorenzlab.return_map import check_cone_invariance, check_lorenz_axioms
from lorenzlab.symbolic import build_horseshoe, cylinder_of, find_periodic

P = DEFAULT_PARAMS


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_01_model_validity(record):
    with Timer() as t:
        rep = check_lorenz_axioms(P)
        slope = Fraction(str(P.mu)) * Fraction(str(P.rho))
        checks = {
            "axioms": rep.valid and validate_map(P).valid,
            "slope_exact": slope == Fraction("1.4625") and slope * slope > 2,
            "slope_float": validate_map(P).min_slope == 1.4625,
            "dHdy": "0.25" in rep.check("sup_dHdy_lt_1").detail,
            "dHdx": rep.K == 0.5,
            "l1+l3": P.lambda1 + P.lambda3 == -2.0,
            "l2+l3": P.lambda2 + P.lambda3 == 0.5,
        }
    ok = all(checks.values()) and t.elapsed < 1.0
    record(1, ok, f"{sorted(k for k, v in checks.items() if not v) or 'all axioms'}; "
                  f"{t.elapsed:.2f}s < 1s")
    assert ok


def _covers(branches):
    ivs = sorted(b.image for b in branches)
    reach = ivs[0][0]
    if reach > -1.0:
        return False
    for lo, hi in ivs:
        if lo > reach:
            return False
        reach = max(reach, hi)
    return reach >= 1.0


def test_criterion_02_eventually_onto(record):
    rng = np.random.default_rng(2)
    with Timer() as t:
        cert = onto_certificate(P, (0.10, 0.11))
        ok_main = cert.N <= 25 and _covers(cert.branches)
        bound_ok, certified, tracked = True, 0, 0
        for k in range(101):
            if k == 0:
                J, c = (0.10, 0.11), cert
            else:
                # eventual onto-ness is stated for J inside [-1, 1] minus the stable leaf
                w = rng.uniform(1e-3, 0.2)
                lo = rng.uniform(0.0, 1.0 - w)
                J = (lo, lo + w) if rng.random() < 0.5 else (-lo - w, -lo)
                c = onto_certificate(P, J)
                certified += _covers(c.branches)
            # the cut-count bound constrains the depths before the first cover
            for n in range(1, 40):
                if 2 * n >= c.N:
                    break
                tracked += 1
                bound_ok &= len(iterate_interval(P, Interval(*J), 2 * n).cuts) <= 2 ** n - 1
    ok = ok_main and bound_ok and certified == 100 and t.elapsed < 10.0
    record(2, ok, f"N={cert.N} <= 25, exact cover {ok_main}; {certified}/100 random intervals "
                  f"certify; cut bound on {tracked} depths {bound_ok}; {t.elapsed:.1f}s < 10s")
    assert ok


def test_criterion_03_cone_invariance(record):
    rep = check_cone_invariance(P, CONE_ALPHA, 100)
    bound = SQRT2 * CONE_ALPHA / P.lambda0
    ok = rep.passed and rep.worst_ratio <= bound * (1 + 1e-9) and rep.points_checked == 100 * 100
    record(3, ok, f"worst ratio {rep.worst_ratio:.6f} <= sqrt2 alpha/lambda0 = {bound:.6f} "
                  f"on {rep.points_checked} points")
    assert ok


def test_criterion_04_periodic_orbits(record):
    orb = find_periodic(P, "RL")
    with mpmath.workdps(40):
        mu, rho = mpmath.mpf("1.95"), mpmath.mpf("0.75")
        x = mpmath.findroot(lambda t: mu * t ** rho + t - 1, (0.1, 0.5), solver="bisect")
        # y of the 2-cycle: y0 = H(-x, y1), y1 = H(x, y0) solved as a linear system
        A = mpmath.matrix([[1, -P.b * x ** 2], [-P.b * x ** 2, 1]])
        y = mpmath.lu_solve(A, mpmath.matrix([P.c, -P.c]))
        period = 2 * P.r0 + 2 / mpmath.mpf(P.lambda3) * mpmath.log(1 / x)
    ex = abs(orb.point.x - float(x))
    ey = abs(orb.point.y - float(y[0]))
    ep = abs(orb.period - float(period))
    ok = ex <= 1e-10 and ey <= 1e-10 and ep <= 1e-10
    record(4, ok, f"|dx|={ex:.1e} |dy|={ey:.1e} |dperiod|={ep:.1e} (tol 1e-10)")
    assert ok


def test_criterion_05_suspension_consistency(record):
    rng = np.random.default_rng(5)
    words, worst = [], 0.0
    while len(words) < 10:
        w = "".join(rng.choice(["L", "R"], size=int(rng.integers(2, 9))))
        if w in words or cylinder_of(P, w) is None:
            continue
        try:
            find_periodic(P, w)
        except Exception:
            continue
        words.append(w)
        diff = periodic_flow_measure(P, w).integrals() - periodic_trace_integrals(P, w)
        worst = max(worst, float(np.max(np.abs(diff))))
    ok = worst <= 1e-8
    record(5, ok, f"max |atoms - trace| = {worst:.1e} over {words}")
    assert ok


def test_criterion_06_entropy(record):
    periodic = [entropy_of(P, w).h_flow for w in ("RL", "RLL", "RRL", "RRLL", "RLRLL")]
    cert = build_horseshoe(P, "RL", "RLL")
    h = entropy_of(P, ("bernoulli", 0.5, cert)).h_map
    err = abs(h - math.log(2) / 2.5)
    ok = all(v == 0.0 for v in periodic) and err <= 1e-12
    record(6, ok, f"periodic entropies {periodic}; |h_map - ln2/2.5| = {err:.1e}")
    assert ok


def test_criterion_07_measure_path(record, rl_rll_table):
    p101 = measure_path(P, "RL", "RLL", 101, table=rl_rll_table)
    p201 = measure_path(P, "RL", "RLL", 201, table=rl_rll_table)
    e0 = weak_star_distance(p101[0], periodic_flow_measure(P, "RL"))
    e1 = weak_star_distance(p101[-1], periodic_flow_measure(P, "RLL"))
    m101, m201 = max(p101.step_distances()), max(p201.step_distances())
    ok = e0 <= 1e-8 and e1 <= 1e-8 and m201 <= 0.5 * m101 * 1.2
    record(7, ok, f"m={rl_rll_table.m}; endpoint errors {e0:.1e}, {e1:.1e}; max step "
                  f"{m101:.3e} -> {m201:.3e} (ratio {m201 / m101:.3f} <= 0.6)")
    assert ok


def test_criterion_08_connecting(record):
    with Timer() as t:
        pert = PerturbationParams(side="+")
        x_rl = find_periodic(P, "RL").point.x
        results = [connect(pert, 0.0), connect(pert, x_rl)]
        ratio = min(min(track_curve(pert, n).expansion_ratios())
                    for n in range(max(r.n for r in results) + 1))
    ok = (all(r.residual <= 1e-10 and r.n <= 64 and r.valid for r in results)
          and ratio >= 0.95 and t.elapsed < 60)
    desc = "; ".join(f"target {r.target:.5f}: n={r.n} s*={r.s_star:.6e} res={r.residual:.1e}"
                     for r in results)
    record(8, ok, f"{desc}; min expansion ratio {ratio:.3f}; {t.elapsed:.1f}s < 60s")
    assert ok


def test_criterion_09_loop_lab(record):
    with Timer() as t:
        pert = PerturbationParams(side="+")
        loop = connect(pert, 0.0)
        fam = loop_periodic_family(pert, loop.s_star, loop.n, count=5)
    pairs = list(zip(fam, fam[1:]))
    closest = all(b.log10_closest < a.log10_closest for a, b in pairs)
    dist = all(b.d_sigma < a.d_sigma for a, b in pairs)
    haus = all(b.log10_hausdorff < a.log10_hausdorff for a, b in pairs)
    ok = (len(fam) >= 5 and closest and dist and haus and fam[-1].d_sigma < 0.05
          and t.elapsed < 120)
    record(9, ok, f"{len(fam)} orbits; d(mu_k, delta_sigma) = "
                  f"{[round(o.d_sigma, 4) for o in fam]}; log10 closest "
                  f"{[round(o.log10_closest) for o in fam]}; {t.elapsed:.1f}s < 120s")
    assert ok


def test_criterion_10_isolation_lab(record):
    with Timer() as t:
        rep = isolation_report(PerturbationParams(side="+"), PerturbationParams(side="-"),
                               target_word="RL", max_len=12, caps=(8, 10, 12))
    g = rep.perturbed.gaps
    c = rep.control.gaps
    parts = {
        "gap>0": g[12] > 0,
        "gap non-decreasing 8->10->12": g[8] <= g[10] <= g[12],
        "passages": rep.passages_ok,
        "min int phi >= 0": rep.min_phi_integral >= 0,
        "control shrinks": c[8] > c[10] > c[12],
        "time": t.elapsed < 300,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    record(10, ok, f"gaps {g[8]:.4f}, {g[10]:.4f}, {g[12]:.4f}; control {c[8]:.4f}, "
                   f"{c[10]:.4f}, {c[12]:.4f}; min int phi {rep.min_phi_integral:.3e}; "
                   f"{t.elapsed:.1f}s; failed: {failed or 'none'}")
    assert ok


def test_criterion_11_periodic_approximation(record):
    with Timer() as t:
        target = random_empirical_measure(P, 100_000, seed=0)
        res = approximate_by_periodic(P, target, 0.05)
    ok = res.distance <= 0.05 and t.elapsed < 120
    record(11, ok, f"word length {len(res.word)}, distance {res.distance:.4f} <= 0.05; "
                   f"{t.elapsed:.1f}s < 120s")
    assert ok


_RUN_ALL = """
import sys
from lorenzlab.cli import COMMANDS, main
for name in COMMANDS:
    main(["--out", sys.argv[1], "--quiet", name])
"""


def test_criterion_12_determinism(record, tmp_path):
    dirs = [tmp_path / "run_a", tmp_path / "run_b"]
    env = dict(os.environ, PYTHONHASHSEED="random")
    procs = [subprocess.Popen([sys.executable, "-c", _RUN_ALL, str(d)], env=env,
                              stdout=subprocess.PIPE, stderr=subprocess.PIPE) for d in dirs]
    for p in procs:
        p.communicate(timeout=1800)
    files_a = sorted(f.name for f in dirs[0].iterdir())
    files_b = sorted(f.name for f in dirs[1].iterdir())
    reports = [f for f in files_a if f.endswith(".json")]
    same = files_a == files_b and all(
        (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files_a)
    ok = same and len(reports) == len(COMMANDS)
    record(12, ok, f"{len(reports)} subcommand reports and {len(files_a) - len(reports)} "
                   f"artifacts byte-identical across two concurrent runs: {same}")
    assert ok
