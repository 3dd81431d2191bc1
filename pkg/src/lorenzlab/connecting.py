"""One-parameter perturbations of the quotient map and the experiments built on them.

``f_s = f + s B(.)`` with a smoothstep bump next to x = -1 (side '+') or
``f - s B(.)`` next to x = +1 (side '-').  The unstable branch of the
singularity through z+ lands at ``gamma_0(s) = f_s(-1)`` and its section
orbit is ``gamma_n(s) = f_s^n(gamma_0(s))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import mpmath
import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import dictionary
from .errors import (DepthCapError, EmptyFamilyError, InputError, LorenzLabError,
                     MathCheckFailure)
from .expanding_map import (BUMP_PRIME_SUP, DEFAULT_DEPTH_CAP, Bump, LorenzMap,
                            smoothstep_bump, validate_map)
from .measures import FlowMeasure, delta_sigma, weak_star_distance
from .params import DEFAULT_PARAMS, SQRT2, ModelParams
from .return_map import SectionPoint, one_return_trace, trace_of_points
from .symbolic import find_periodic, flip


@dataclass(frozen=True)
class PerturbationParams:
    side: str = "+"
    eta: float = 0.05
    tau: Optional[float] = None
    lambda_margin: float = 1.43
    params: ModelParams = DEFAULT_PARAMS
    fixed: tuple = ()  # bumps already in place (disjoint supports)

    def __post_init__(self):
        if self.side not in ("+", "-"):
            raise InputError("side must be '+' or '-'")
        if not (math.isfinite(self.eta) and 0 < self.eta < 1):
            raise InputError("eta must lie in (0, 1)")
        if not self.lambda_margin >= SQRT2:
            raise InputError("the slope floor lambda must be at least sqrt(2)")
        if self.tau is not None and not (math.isfinite(self.tau) and self.tau > 0):
            raise InputError("tau must be positive")

    @property
    def orientation(self) -> float:
        """Sign of d gamma_0 / ds."""
        return 1.0 if self.side == "+" else -1.0

    @property
    def start(self) -> float:
        return -1.0 if self.side == "+" else 1.0

    def bump(self, s) -> Bump:
        return Bump(self.side, self.eta, s)

    def map_at(self, s: float) -> LorenzMap:
        return LorenzMap(self.params, self.fixed + (self.bump(s),))

    def base_map(self) -> LorenzMap:
        return LorenzMap(self.params, self.fixed)

    def gamma0(self, s: float) -> float:
        sym = "L" if self.side == "+" else "R"
        return self.map_at(s).branch(sym, self.start)

    def tau_value(self) -> float:
        return self.tau if self.tau is not None else validate_family(self).tau_max


def eval_f_s(pert: PerturbationParams, s: float, x: float) -> float:
    return pert.map_at(s).f(x)


# ---------------------------------------------------------------------------
# admissible parameter range


@dataclass
class FamilyReport:
    tau_max: float
    inf_slope: float
    lambda_margin: float
    validity: object

    def to_dict(self):
        return {"tau_max": self.tau_max, "inf_slope": self.inf_slope,
                "lambda": self.lambda_margin, "sup_bump_prime": BUMP_PRIME_SUP,
                "valid_at_tau_max": self.validity.valid,
                "min_slope_at_tau_max": self.validity.min_slope}


def validate_family(pert: PerturbationParams) -> FamilyReport:
    """tau_max = (inf f' - lambda) eta / sup|B'| keeps every f_s above the slope floor."""
    base = pert.base_map()
    inf_slope = validate_map(base).min_slope
    if pert.lambda_margin >= inf_slope:
        raise EmptyFamilyError(
            f"lambda={pert.lambda_margin} is not below inf f' = {inf_slope}")
    tau_max = (inf_slope - pert.lambda_margin) * pert.eta / BUMP_PRIME_SUP
    report = validate_map(pert.map_at(tau_max))
    return FamilyReport(tau_max, inf_slope, pert.lambda_margin, report)


def slope_floor_scan(pert: PerturbationParams, n_s: int = 100, grid: int = 10_000) -> float:
    """min over an s-scan of [0, tau] and an x-grid of f_s'."""
    tau = pert.tau_value()
    par = pert.params
    xs = np.linspace(-1.0, 1.0, grid)
    xs = xs[xs != 0.0]
    base = par.mu * par.rho * np.abs(xs) ** (par.rho - 1.0)
    for b in pert.fixed:
        base = base + np.array([b.d_dx(x) for x in xs])
    shape = np.array([Bump(pert.side, pert.eta, 1.0).d_dx(x) for x in xs])
    worst = math.inf
    for s in np.linspace(0.0, tau, n_s):
        worst = min(worst, float(np.min(base + s * shape)))
    return worst


# ---------------------------------------------------------------------------
# parameter curves


@dataclass(frozen=True)
class ParamBranch:
    s_lo: float
    s_hi: float
    word: str
    values: tuple  # gamma_n at s_lo (right limit) and at s_hi (left limit)

    @property
    def image(self):
        return (min(self.values), max(self.values))

    def slope(self) -> float:
        return abs(self.values[1] - self.values[0]) / (self.s_hi - self.s_lo)

    def monotone(self, pert: "PerturbationParams", samples: int = 8) -> bool:
        """gamma_n strictly monotone (in the family's orientation) on interior samples."""
        ss = np.linspace(self.s_lo, self.s_hi, samples + 2)[1:-1]
        vals = [self.values[0]] + [gamma_n(pert, float(s), self.word) for s in ss]
        vals.append(self.values[1])
        return all(pert.orientation * (b - a) > 0 for a, b in zip(vals, vals[1:]))

    def to_dict(self):
        return {"s": [self.s_lo, self.s_hi], "word": self.word, "values": list(self.values)}


@dataclass
class ParamCurve:
    n: int
    branches: list
    tau: float
    gamma0_slope: float = 1.0
    lambda_margin: float = 1.43

    @property
    def cuts(self):
        return [b.s_lo for b in self.branches[1:]]

    def expansion_ratios(self) -> list:
        """Finite-difference slope over lambda^n gamma_0' on every branch."""
        floor = self.lambda_margin ** self.n * self.gamma0_slope
        return [b.slope() / floor for b in self.branches]

    def monotone_certificate(self, pert: "PerturbationParams", samples: int = 8) -> bool:
        return all(b.monotone(pert, samples) for b in self.branches)

    def to_dict(self):
        return {"n": self.n, "tau": self.tau, "branches": [b.to_dict() for b in self.branches],
                "cuts": self.cuts, "min_expansion_ratio": min(self.expansion_ratios())}


def gamma_n(pert: PerturbationParams, s: float, word: str) -> float:
    fmap = pert.map_at(s)
    x = pert.gamma0(s)
    for sym in word:
        x = fmap.branch(sym, x)
    return x


def _split_param(pert: PerturbationParams, br: ParamBranch) -> list:
    v0, v1 = br.values
    if (v0 < 0.0 < v1) or (v1 < 0.0 < v0):
        g = lambda s: gamma_n(pert, s, br.word)
        sc = brentq(g, br.s_lo, br.s_hi, xtol=1e-18, rtol=8.9e-16, maxiter=500)
        sym_l = "L" if v0 < 0 else "R"
        sym_r = "R" if v0 < 0 else "L"
        m_lo, m_c, m_hi = pert.map_at(br.s_lo), pert.map_at(sc), pert.map_at(br.s_hi)
        left = ParamBranch(br.s_lo, sc, br.word + sym_l,
                           (m_lo.branch(sym_l, v0), m_c.branch(sym_l, 0.0)))
        right = ParamBranch(sc, br.s_hi, br.word + sym_r,
                            (m_c.branch(sym_r, 0.0), m_hi.branch(sym_r, v1)))
        return [left, right]
    ref = v0 if v0 != 0.0 else v1
    sym = "R" if ref > 0 else "L"
    return [ParamBranch(br.s_lo, br.s_hi, br.word + sym,
                        (pert.map_at(br.s_lo).branch(sym, v0),
                         pert.map_at(br.s_hi).branch(sym, v1)))]


def _curves(pert: PerturbationParams, depth_cap: int):
    tau = pert.tau_value()
    branches = [ParamBranch(0.0, tau, "", (pert.gamma0(0.0), pert.gamma0(tau)))]
    for n in range(depth_cap + 1):
        yield ParamCurve(n, branches, tau, 1.0, pert.lambda_margin)
        branches = [c for br in branches for c in _split_param(pert, br)]


def track_curve(pert: PerturbationParams, n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> ParamCurve:
    """Branch decomposition of s -> gamma_n(s) over [0, tau]."""
    if n < 0:
        raise InputError("n must be >= 0")
    if n > depth_cap:
        raise DepthCapError(f"depth {n} exceeds the cap {depth_cap}", {"n": n})
    for curve in _curves(pert, n):
        if curve.n == n:
            return curve


@dataclass
class ConnectResult:
    side: str
    target: float
    s_star: float
    n: int
    residual: float
    word: str
    valid: bool
    tau: float
    min_expansion_ratio: float
    branch_counts: list = field(default_factory=list)

    def bump(self, eta: float) -> Bump:
        return Bump(self.side, eta, self.s_star)

    def to_dict(self):
        return {"side": self.side, "target": self.target, "s_star": self.s_star, "n": self.n,
                "residual": self.residual, "word": self.word, "revalidated": self.valid,
                "tau": self.tau, "min_expansion_ratio": self.min_expansion_ratio,
                "branch_counts": self.branch_counts}


def replay(pert: PerturbationParams, s: float, n: int) -> float:
    """f_s^n(f_s(start)) by plain iteration of f_s."""
    fmap = pert.map_at(s)
    x = fmap.f(pert.start)
    for _ in range(n):
        x = fmap.f(x)
    return x


def connect(pert: PerturbationParams, target_x: float, tol: float = 1e-10,
            depth_cap: int = DEFAULT_DEPTH_CAP) -> ConnectResult:
    """Smallest n and a parameter s* with gamma_n(s*) = target_x within tol."""
    if not -1.0 < target_x < 1.0:
        raise InputError("target_x must lie in (-1, 1)")
    if not tol > 0:
        raise InputError("tol must be positive")
    counts = []
    min_ratio = math.inf
    for curve in _curves(pert, depth_cap):
        counts.append(len(curve.branches))
        min_ratio = min(min_ratio, min(curve.expansion_ratios()))
        for br in curve.branches:
            lo, hi = br.image
            if lo < target_x < hi or (tol >= hi - lo and lo - tol <= target_x <= hi + tol):
                g = lambda s, w=br.word: gamma_n(pert, s, w) - target_x
                if g(br.s_lo) * g(br.s_hi) < 0:
                    s_star = brentq(g, br.s_lo, br.s_hi, xtol=1e-18, rtol=8.9e-16, maxiter=500)
                else:
                    s_star = 0.5 * (br.s_lo + br.s_hi)
                res = abs(replay(pert, s_star, curve.n) - target_x)
                if res > tol:
                    continue
                valid = validate_map(pert.map_at(s_star)).valid
                return ConnectResult(pert.side, target_x, s_star, curve.n, res, br.word, valid,
                                     curve.tau, min_ratio, counts)
    raise DepthCapError(f"target {target_x} not reached within depth {depth_cap}",
                        {"branch_counts": counts})


def connect_to_orbit(pert: PerturbationParams, word: str, tol: float = 1e-10,
                     depth_cap: int = DEFAULT_DEPTH_CAP) -> ConnectResult:
    """Connect to the stable leaf of whichever point of the orbit is reached first."""
    orb = find_periodic(pert.map_at(0.0), word)
    best = None
    for p in orb.points:
        try:
            res = connect(pert, p.x, tol, depth_cap)
        except DepthCapError:
            continue
        if best is None or (res.n, res.s_star) < (best.n, best.s_star):
            best = res
    if best is None:
        raise DepthCapError(f"no orbit point of {word} reached", {"word": word})
    return best


# ---------------------------------------------------------------------------
# homoclinic-loop lab


def _mp_bump_value(side, eta, s, x):
    u = (x + 1) / eta if side == "+" else (1 - x) / eta
    if u >= 1:
        return mpmath.mpf(0), mpmath.mpf(0), mpmath.mpf(0)
    if u < 0:
        u = mpmath.mpf(0)
    B = 1 - (3 * u * u - 2 * u ** 3)
    dB = (-6 * u + 6 * u * u) / eta * (1 if side == "+" else -1)
    sign = 1 if side == "+" else -1
    return sign * s * B, sign * s * dB, sign * B


def _mp_core(par: ModelParams, bumps, sym: str, x):
    """Branch value and d/dx at high precision; bumps may carry mpf parameters."""
    mu, rho = mpmath.mpf(par.mu), mpmath.mpf(par.rho)
    if sym == "R":
        ax = x if x > 0 else mpmath.mpf(0)
        v = mu * ax ** rho - 1
    else:
        ax = -x if x < 0 else mpmath.mpf(0)
        v = 1 - mu * ax ** rho
    dv = mu * rho * ax ** (rho - 1) if ax > 0 else mpmath.inf
    for bp in bumps:
        val, dval, _ = _mp_bump_value(bp.side, mpmath.mpf(bp.eta), mpmath.mpf(bp.s), x)
        v += val
        dv += dval
    return v, dv


def _mp_step(pert: PerturbationParams, s, sym: str, x):
    """Branch value, d/dx and d/ds at high precision."""
    v, dv = _mp_core(pert.params, pert.fixed, sym, x)
    val, dval, dsval = _mp_bump_value(pert.side, mpmath.mpf(pert.eta), s, x)
    return v + val, dv + dval, dsval


def _mp_periodic_points(par: ModelParams, bumps, word: str, x0: float):
    """Periodic orbit of the given word by Newton in the working precision."""
    x = mpmath.mpf(x0)
    tol = mpmath.mpf(10) ** -(mpmath.mp.dps - 10)
    for _ in range(200):
        z, d = x, mpmath.mpf(1)
        for sym in word:
            z, dz = _mp_core(par, bumps, sym, z)
            d *= dz
        step = (z - x) / (d - 1)
        x -= step
        if abs(step) < tol:
            break
    pts = [x]
    for sym in word[:-1]:
        pts.append(_mp_core(par, bumps, sym, pts[-1])[0])
    return pts


def _mp_connect(pert: PerturbationParams, conn, target):
    """Refine a float connecting parameter so gamma_n(s) = target in the working precision."""
    first = "L" if pert.side == "+" else "R"
    s = mpmath.mpf(conn.s_star)
    tol = mpmath.mpf(10) ** -(mpmath.mp.dps - 10)
    for _ in range(200):
        x, dxds = mpmath.mpf(pert.start), mpmath.mpf(0)
        for sym in first + conn.word:
            v, dv, ds = _mp_step(pert, s, sym, x)
            dxds = dv * dxds + ds
            x = v
        step = (x - target) / dxds
        s -= step
        if abs(step) < tol * max(abs(s), 1):
            break
    return s


@dataclass
class LoopOrbit:
    word: str
    s: float
    log_depth: float
    measure: FlowMeasure = field(repr=False)
    log10_closest: float = 0.0
    log10_hausdorff: float = 0.0
    d_sigma: float = 0.0
    period: float = 0.0

    def to_row(self):
        return [self.word, repr(self.period), repr(self.log10_closest), repr(self.d_sigma),
                repr(self.log10_hausdorff)]


def _loop_points(pert, s_star: float, word: str, dps: int):
    """Loop z+, gamma_0..gamma_{n-1}, (0, y_n) at the exact connecting parameter."""
    par = pert.params
    c, b, nu = mpmath.mpf(par.c), mpmath.mpf(par.b), mpmath.mpf(par.nu)
    start = mpmath.mpf(pert.start)
    first = "L" if pert.side == "+" else "R"
    with mpmath.workdps(dps):
        s = mpmath.mpf(s_star)
        for _ in range(60):
            x, dxds = start, mpmath.mpf(0)
            for sym in first + word:
                v, dv, ds = _mp_step(pert, s, sym, x)
                dxds = dv * dxds + ds
                x = v
            s -= x / dxds
            if abs(x) < mpmath.mpf(10) ** -(dps - 10):
                break
        x, y = start, start * c
        pts = [(x, y)]
        for sym in first + word:
            y = -mpmath.sign(x) * c + b * y * abs(x) ** nu
            x = _mp_step(pert, s, sym, x)[0]
            pts.append((x, y))
        pts[-1] = (mpmath.mpf(0), pts[-1][1])
    return pts


def _hausdorff(A, B):
    def d(a, b):
        return mpmath.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
    h1 = max(min(d(a, b) for b in B) for a in A)
    h2 = max(min(d(a, b) for a in A) for b in B)
    return max(h1, h2)


def _solve_loop_orbit(pert, s_star, loop_word, log_depth, max_iter=60):
    """Parameter s and orbit with f_s^{n+2}(x) = x for x = e^-log_depth on the loop side."""
    n = len(loop_word)
    entry = "R" if pert.side == "+" else "L"
    after = "L" if pert.side == "+" else "R"
    word = entry + after + loop_word
    dps = int(log_depth / math.log(10)) + 40
    with mpmath.workdps(dps):
        x0 = mpmath.exp(-mpmath.mpf(log_depth))
        if entry == "L":
            x0 = -x0
        s = mpmath.mpf(s_star)
        tol = mpmath.mpf(10) ** -20 * abs(x0)
        for _ in range(max_iter):
            x, dxds = x0, mpmath.mpf(0)
            for sym in word:
                v, dv, ds = _mp_step(pert, s, sym, x)
                dxds = dv * dxds + ds
                x = v
            F = x - x0
            step = F / dxds
            s -= step
            if abs(F) <= tol:
                break
        else:
            raise MathCheckFailure(f"loop orbit at depth {log_depth} did not converge")
        xs = [x0]
        x = x0
        for sym in word[:-1]:
            x = _mp_step(pert, s, sym, x)[0]
            xs.append(x)
        for xv, sym in zip(xs, word):
            if (xv > 0) != (sym == "R") or xv == 0:
                raise MathCheckFailure(f"loop orbit at depth {log_depth} is not admissible")
        # y by the contracting H-cycle, in the same precision
        par = pert.params
        c, b, nu = mpmath.mpf(par.c), mpmath.mpf(par.b), mpmath.mpf(par.nu)
        y = mpmath.mpf(0)
        for _ in range(50):
            for xv in xs:
                y = -mpmath.sign(xv) * c + b * y * abs(xv) ** nu
        ys = []
        for xv in xs:
            ys.append(y)
            y = -mpmath.sign(xv) * c + b * y * abs(xv) ** nu
        pts = list(zip(xs, ys))
        return word, s, pts


def loop_periodic_family(pert: PerturbationParams, s_star: float, n_loop: int, count: int = 5,
                         log_depth0: float = 250.0, growth: float = 2.0,
                         loop_word: Optional[str] = None) -> list:
    """Periodic orbits of f_{s_k} shadowing the homoclinic loop ever more closely.

    Orbit k passes the stable leaf at distance e^{-L_k}, L_k = log_depth0
    growth^k; its parameter s_k -> s* solves the closing equation at high
    precision.  Returned sorted by closest approach (decreasing).
    """
    if count < 1:
        raise InputError("count must be >= 1")
    if loop_word is None:
        word = ""
        fmap = pert.map_at(s_star)
        x = pert.gamma0(s_star)
        for _ in range(n_loop):
            sym = "R" if x > 0 else "L"
            word += sym
            x = fmap.branch(sym, x)
        loop_word = word
    if len(loop_word) != n_loop:
        raise InputError("loop word length must equal n_loop")
    out = []
    sigma = delta_sigma()
    for k in range(count):
        L = log_depth0 * growth ** k
        word, s_k, pts = _solve_loop_orbit(pert, s_star, loop_word, L)
        ref = _loop_points(pert, s_star, loop_word, int(L / math.log(10)) + 40)
        with mpmath.workdps(int(L / math.log(10)) + 40):
            haus = _hausdorff(pts, ref)
            log10_h = float(mpmath.log10(haus)) if haus > 0 else -math.inf
        fmap = pert.map_at(float(s_k))
        section = []
        for xv, yv in pts:
            lx = float(mpmath.log(abs(xv)))
            section.append(SectionPoint(math.copysign(0.0, float(mpmath.sign(xv)))
                                        if abs(xv) < 1e-300 else float(xv), float(yv), lx))
        meas = FlowMeasure.from_points(fmap, section, meta={"variant": "periodic", "word": word})
        period = float(meas.roofs.sum())
        d = weak_star_distance(meas, sigma)
        out.append(LoopOrbit(word, float(s_k), L, meas, -L / math.log(10), log10_h, d, period))
    out.sort(key=lambda o: -o.log10_closest)
    return out


def loop_family_csv(family) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["word", "period", "log10_closest_approach", "d_to_delta_sigma",
                "log10_hausdorff"])
    for o in family:
        w.writerow(o.to_row())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# isolation lab


def _primitive_words(max_len: int):
    """One word per rotation class of primitive words over {L, R} up to max_len."""
    for n in range(1, max_len + 1):
        mask = (1 << n) - 1
        for v in range(1 << n):
            rots = [((v << k) | (v >> (n - k))) & mask for k in range(n)]
            if v != min(rots) or len(set(rots)) != n:
                continue
            yield "".join("R" if (v >> (n - 1 - i)) & 1 else "L" for i in range(n))


@dataclass
class Enumeration:
    words: list
    measures: list
    distances: list
    gaps: dict   # length cap -> min distance to delta_sigma

    def to_dict(self):
        return {"count": len(self.words), "gaps": {str(k): v for k, v in self.gaps.items()},
                "argmin": {str(k): self.words[int(np.argmin(
                    [d for w, d in zip(self.words, self.distances) if len(w) <= k]))]
                    for k in self.gaps}}


def enumerate_periodic(fmap: LorenzMap, max_len: int, caps=None) -> Enumeration:
    sigma = delta_sigma()
    words, measures, dists = [], [], []
    for w in _primitive_words(max_len):
        try:
            orb = find_periodic(fmap, w)
        except LorenzLabError:
            continue
        m = FlowMeasure.from_points(fmap, orb.points, meta={"variant": "periodic", "word": w})
        words.append(w)
        measures.append(m)
        dists.append(weak_star_distance(m, sigma))
    caps = caps or list(range(2, max_len + 1, 2))
    gaps = {}
    for cap in caps:
        ds = [d for w, d in zip(words, dists) if len(w) <= cap]
        gaps[cap] = min(ds) if ds else math.inf
    return Enumeration(words, measures, dists, gaps)


@dataclass
class PassageConstants:
    kappa: float
    T0: float
    K: float
    L: float
    u1: float
    delta1: float
    strip: float        # section |x| below which a passage counts
    r_V: float          # x-radius of the orbit neighbourhood on the section

    def to_dict(self):
        return dict(self.__dict__)


def _orbit_neighbourhood_stats(fmap: LorenzMap, orb, r_V: float, samples: int = 201):
    """sup |(f^l)'| and inf return time over x within r_V of each orbit point."""
    par = fmap.params
    kappa, T0 = 0.0, math.inf
    for k in range(len(orb.points)):
        rot = orb.word[k:] + orb.word[:k]
        x_c = orb.points[k].x
        for x in np.linspace(x_c - r_V, x_c + r_V, samples):
            d, t, z = 1.0, 0.0, float(x)
            for sym in rot:
                d *= fmap.df(z)
                t += par.roof(z)
                z = fmap.branch(sym, z)
            kappa = max(kappa, d)
            T0 = min(T0, t)
    return kappa, T0


def passage_constants(fmap: LorenzMap, orb, connections, r_V: float = 0.02) -> PassageConstants:
    """Model values of kappa, T0, K, L and delta_1 for the time estimate.

    The weakest contraction lambda2 plays u1; an entry at section coordinate
    x leaves the cube with stable size |x|^rho, the x_w of the estimate.  K
    bounds the landing distance (in units of r_V) by K |x|^rho.
    """
    par = fmap.params
    kappa, T0 = _orbit_neighbourhood_stats(fmap, orb, r_V)
    K = 0.0
    for conn in connections:
        # one-sided derivative along the connecting orbit, starting from the
        # image of the cube exit: x1 = -1 + mu |x|^rho (side +)
        x = -1.0 if conn.side == "+" else 1.0
        d = par.mu
        seq = ("L" if conn.side == "+" else "R") + conn.word
        for sym in seq:
            d *= fmap.df(x if x != 0.0 else math.copysign(1e-300, 1.0))
            x = fmap.branch(sym, x)
        K = max(K, 2.0 * d / r_V)
    u1 = par.lambda2
    L = -u1 * T0 / (2.0 * math.log(kappa))
    # (log K + 2 log kappa) / log delta1 > -1/2
    delta1 = 0.5 * (K * kappa ** 2) ** -2.0
    strip = delta1 ** (1.0 / par.rho)
    return PassageConstants(kappa, T0, K, L, u1, delta1, strip, r_V)


@dataclass
class Passage:
    log10_entry: float
    dwell: float
    transit: int
    T_p: float
    bound: float
    predicted: float
    ok: bool

    def to_dict(self):
        return dict(self.__dict__)


def probe_passage(fmap: LorenzMap, orb, const: PassageConstants, log10_entry: float,
                  sign: float = 1.0, exact=None, max_steps: int = 100000) -> Passage:
    """Follow an entry at |x| = 10^log10_entry past sigma, then time its stay near the orbit.

    ``exact`` optionally supplies (bumps, orbit points) at high precision so
    the landing is not limited by the double-precision connection.
    """
    par = fmap.params
    digits = int(abs(log10_entry)) + 40
    bumps, pts = exact if exact is not None else (tuple(fmap.bumps), [p.x for p in orb.points])
    with mpmath.workdps(digits):
        x = sign * mpmath.mpf(10) ** log10_entry
        dwell = -float(mpmath.log(abs(x))) / par.lambda3

        def step(z):
            return _mp_core(par, bumps, "R" if z > 0 else "L", z)[0]

        z = step(x)
        transit = 1
        while transit < 200 and min(abs(z - p) for p in pts) > const.r_V:
            z = step(z)
            transit += 1
        T_p = 0.0
        steps = 0
        while steps < max_steps and z != 0 and min(abs(z - p) for p in pts) <= const.r_V:
            T_p += par.roof(float(z))
            z = step(z)
            steps += 1
    bound = const.L * dwell
    predicted = (-(math.log(const.K) + par.rho * log10_entry * math.log(10)) / math.log(const.kappa)
                 - 2.0) * const.T0
    return Passage(log10_entry, dwell, transit, T_p, bound, predicted, T_p >= bound)


def enumerated_passages(measures, const: PassageConstants, fmap: LorenzMap, orb,
                        exact=None) -> list:
    """Passages of enumerated periodic orbits through the near-sigma strip."""
    out = []
    for m in measures:
        xs = m.x
        for k, x in enumerate(xs):
            if abs(x) < const.strip:
                out.append(probe_passage(fmap, orb, const, math.log10(abs(x)),
                                         math.copysign(1.0, x), exact))
    return out


class PhiFunction:
    """The isolating test function in ambient coordinates.

    -1 at sigma falling linearly to 0 at radius R_sigma, plus 1/L on a
    tube around the target orbit's trace (radius rho_V) decaying to 0 at
    2 rho_V; 0 elsewhere.
    """

    def __init__(self, fmap: LorenzMap, orb, const: PassageConstants, R_sigma: float,
                 samples: int = 4000):
        self.L = const.L
        self.R_sigma = R_sigma
        trace = trace_of_points(fmap, orb.points)
        ts = np.linspace(0.0, trace.duration, samples)
        self.curve = trace.positions(ts)
        self.tree = cKDTree(self.curve)
        # radius covering the traces of the whole section neighbourhood
        worst = 0.0
        par = fmap.params
        for p in orb.points:
            for dx in (-const.r_V, 0.0, const.r_V):
                for y in (p.y - 0.05, p.y + 0.05):
                    tr = one_return_trace(fmap, SectionPoint(p.x + dx, y))
                    P = tr.positions(np.linspace(0.0, tr.duration, 400))
                    worst = max(worst, float(self.tree.query(P)[0].max()))
        self.rho_V = 1.05 * worst
        self.sigma_clearance = float(np.min(np.linalg.norm(self.curve, axis=1)))

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=1)
        neg = -np.maximum(0.0, 1.0 - r / self.R_sigma)
        d = self.tree.query(pts)[0]
        pos = np.clip(2.0 - d / self.rho_V, 0.0, 1.0) / self.L
        return neg + pos

    def supports_disjoint(self) -> bool:
        return self.R_sigma + 2.0 * self.rho_V < self.sigma_clearance

    def to_dict(self):
        return {"L": self.L, "R_sigma": self.R_sigma, "rho_V": self.rho_V,
                "sigma_clearance": self.sigma_clearance,
                "supports_disjoint": self.supports_disjoint()}


_PHI_NODES, _PHI_WEIGHTS = np.polynomial.legendre.leggauss(16)


def integrate_phi(phi: PhiFunction, fmap: LorenzMap, measure: FlowMeasure,
                  panel: float = 0.125) -> float:
    """Time average of phi over the periodic trace (composite Gauss-Legendre)."""
    pts = [SectionPoint(x, y, lx) for x, y, lx in zip(measure.x, measure.y, measure.logx)]
    trace = trace_of_points(fmap, pts)
    total = 0.0
    for seg in trace.segments:
        if seg.duration <= 0:
            continue
        npan = max(1, math.ceil(seg.duration / panel))
        h = seg.duration / npan
        starts = seg.t0 + h * np.arange(npan)
        t = (starts[:, None] + 0.5 * h * (_PHI_NODES[None, :] + 1.0)).ravel()
        vals = phi(seg.positions(t)).reshape(npan, -1)
        total += 0.5 * h * float(np.sum(vals @ _PHI_WEIGHTS))
    return total / trace.duration


@dataclass
class IsolationReport:
    connections: list
    constants: PassageConstants
    perturbed: Enumeration
    control: Enumeration
    passages: list
    probes: list
    phi: dict
    min_phi_integral: float
    gaps_nondecreasing: bool
    control_shrinks: bool

    @property
    def passages_ok(self) -> bool:
        return all(p.ok for p in self.passages + self.probes)

    @property
    def passed(self) -> bool:
        gap = min(self.perturbed.gaps.values())
        return (gap > 0 and self.gaps_nondecreasing and self.passages_ok
                and self.min_phi_integral >= 0 and self.control_shrinks
                and self.phi["supports_disjoint"])

    def to_dict(self):
        return {"connections": [c.to_dict() for c in self.connections],
                "constants": self.constants.to_dict(),
                "perturbed": self.perturbed.to_dict(), "control": self.control.to_dict(),
                "enumerated_passages": [p.to_dict() for p in self.passages],
                "probe_passages": [p.to_dict() for p in self.probes],
                "phi": self.phi, "min_phi_integral": self.min_phi_integral,
                "gaps_nondecreasing": self.gaps_nondecreasing,
                "control_shrinks": self.control_shrinks, "passed": self.passed}


def isolation_report(pert_plus: PerturbationParams, pert_minus: PerturbationParams,
                     target_word: str = "RL", max_len: int = 12, caps=(8, 10, 12),
                     probe_decades: int = 40, r_V: float = 0.02) -> IsolationReport:
    """Connect both unstable branches to the target orbit and test isolation of delta_sigma."""
    if pert_plus.side != "+" or pert_minus.side != "-":
        raise InputError("need one '+' and one '-' perturbation")
    if pert_plus.params != pert_minus.params:
        raise InputError("both perturbations must act on the same model")
    lo_p, hi_p = pert_plus.bump(1.0).support()
    lo_m, hi_m = pert_minus.bump(1.0).support()
    if not hi_p < lo_m:
        raise InputError("bump supports overlap")
    conn_p = connect_to_orbit(pert_plus, target_word)
    pm = replace(pert_minus, fixed=pert_plus.fixed + (conn_p.bump(pert_plus.eta),))
    conn_m = connect_to_orbit(pm, target_word)
    fmap = LorenzMap(pert_plus.params, pm.fixed + (conn_m.bump(pm.eta),))
    orb = find_periodic(fmap, target_word)
    const = passage_constants(fmap, orb, [conn_p, conn_m], r_V)

    caps = sorted(caps)
    perturbed = enumerate_periodic(fmap, max_len, caps)
    control = enumerate_periodic(LorenzMap(pert_plus.params), max_len, caps)
    gp = [perturbed.gaps[c] for c in caps]
    gc = [control.gaps[c] for c in caps]
    nondecreasing = all(b >= a for a, b in zip(gp, gp[1:]))
    shrinks = all(b < a for a, b in zip(gc, gc[1:]))

    start = math.floor(math.log10(const.strip))
    with mpmath.workdps(int(abs(start) + probe_decades) + 60):
        pts = _mp_periodic_points(fmap.params, (), target_word, orb.point.x)
        tp = min(pts, key=lambda p: abs(p - conn_p.target))
        s_p = _mp_connect(pert_plus, conn_p, tp)
        b_p = Bump("+", pert_plus.eta, s_p)
        pm_mp = replace(pm, fixed=pert_plus.fixed + (b_p,))
        tm = min(pts, key=lambda p: abs(p - conn_m.target))
        s_m = _mp_connect(pm_mp, conn_m, tm)
        bumps = pm_mp.fixed + (Bump("-", pm.eta, s_m),)
        pts = _mp_periodic_points(fmap.params, bumps, target_word, orb.point.x)
    exact = (bumps, pts)
    passages = enumerated_passages(perturbed.measures, const, fmap, orb, exact)
    probes = []
    for k in range(probe_decades + 1):
        e = start - k
        probes.append(probe_passage(fmap, orb, const, e, 1.0, exact))
        probes.append(probe_passage(fmap, orb, const, e, -1.0, exact))

    R_sigma = const.delta1 ** (1.0 / (1.0 + fmap.params.rho))
    phi = PhiFunction(fmap, orb, const, R_sigma)
    vals = [integrate_phi(phi, fmap, m) for m in perturbed.measures]
    return IsolationReport([conn_p, conn_m], const, perturbed, control, passages, probes,
                           phi.to_dict(), float(min(vals)), nondecreasing, shrinks)
