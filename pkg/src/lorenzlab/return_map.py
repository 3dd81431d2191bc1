"""The Poincare return map P(x, y) = (f(x), H(x, y)) and its cube-and-tube flow.

Inside the cube the flow is the linear system at the singularity,
``xi(t) = (x e^{l3 t}, y e^{l1 t}, e^{l2 t})`` entered on the face xi3 = 1
(which is the section).  It leaves through |xi1| = 1 after
``(1/l3) ln(1/|x|)`` and a tube of fixed duration r0 carries the exit point
back to the section along a straight line.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from . import dictionary
from .errors import DomainError, InputError
from .expanding_map import Check, LorenzMap, as_map, validate_map
from .params import CONE_ALPHA, SQRT2, ModelParams, params_hash

GRID_EXCLUSION = 1e-6


@dataclass(frozen=True)
class SectionPoint:
    """A point of the section.

    ``log_abs_x`` lets a point sit closer to the stable leaf than a float can
    express; when it is set, ``x`` only carries the sign (it may be +-0.0).
    """

    x: float
    y: float
    log_abs_x: Optional[float] = None

    @property
    def sign(self) -> float:
        return math.copysign(1.0, self.x)

    @property
    def logx(self) -> float:
        if self.log_abs_x is not None:
            return self.log_abs_x
        if self.x == 0.0:
            raise DomainError("point on the stable leaf x = 0")
        return math.log(abs(self.x))

    def on_leaf(self) -> bool:
        return self.x == 0.0 and self.log_abs_x is None

    def __neg__(self):
        return SectionPoint(-self.x, -self.y, self.log_abs_x)

    def to_list(self):
        return [self.x, self.y]


def _point(p) -> SectionPoint:
    return p if isinstance(p, SectionPoint) else SectionPoint(*p)


def eval_H(params: ModelParams, x: float, y: float) -> float:
    if x == 0:
        raise DomainError("H is undefined on the stable leaf x = 0")
    return -math.copysign(params.c, x) + params.b * y * abs(x) ** params.nu


def eval_P(params, p) -> SectionPoint:
    fmap = as_map(params)
    p = _point(p)
    if p.on_leaf():
        raise DomainError("P is undefined on the stable leaf x = 0")
    par = fmap.params
    if p.log_abs_x is not None:
        sym = "R" if p.sign > 0 else "L"
        x_abs = math.exp(p.log_abs_x)
        newx = fmap.branch(sym, p.sign * x_abs)
        newy = -p.sign * par.c + par.b * p.y * math.exp(par.nu * p.log_abs_x)
        return SectionPoint(newx, newy)
    return SectionPoint(fmap.f(p.x), eval_H(par, p.x, p.y))


def jacobian_P(params, p) -> np.ndarray:
    fmap = as_map(params)
    p = _point(p)
    if p.x == 0:
        raise DomainError("DP is undefined on the stable leaf x = 0")
    par = fmap.params
    ax = abs(p.x)
    dHdx = par.nu * par.b * p.y * ax ** (par.nu - 1.0) * math.copysign(1.0, p.x)
    dHdy = par.b * ax ** par.nu
    return np.array([[fmap.df(p.x), 0.0], [dHdx, dHdy]])


# ---------------------------------------------------------------------------
# cone field and axioms


@dataclass
class ConeReport:
    alpha: float
    target_aperture: float
    worst_ratio: float
    worst_point: tuple
    points_checked: int
    passed: bool
    params_hash: str

    def to_dict(self):
        return {"alpha": self.alpha, "target_aperture": self.target_aperture,
                "worst_ratio": self.worst_ratio, "worst_point": list(self.worst_point),
                "points_checked": self.points_checked, "passed": self.passed,
                "margin": self.target_aperture * (1 + 1e-9) - self.worst_ratio,
                "params_hash": self.params_hash}


def check_cone_invariance(params, alpha: float = CONE_ALPHA, grid_size: int = 100) -> ConeReport:
    """Image of the extremal cone vectors (1, +-alpha) and (1, 0) on a grid.

    The image slope |b|/|a| must not exceed sqrt(2) alpha / lambda0; since the
    slope of DP v is a Moebius function of the slope of v, the extremes of the
    cone bound every interior vector.
    """
    if alpha < CONE_ALPHA * (1 - 1e-15):
        raise InputError(f"alpha={alpha} below 1/(sqrt2-1); the cone is not invariant in general")
    fmap = as_map(params)
    par = fmap.params
    xs = np.linspace(-1.0, 1.0, grid_size)
    xs = xs[np.abs(xs) >= GRID_EXCLUSION]
    ys = np.linspace(-1.0, 1.0, grid_size)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    ax = np.abs(X)
    fprime = par.mu * par.rho * ax ** (par.rho - 1.0)
    if fmap.perturbed:
        fprime = np.vectorize(fmap.df)(X)
    dHdx = par.nu * par.b * Y * ax ** (par.nu - 1.0) * np.sign(X)
    dHdy = par.b * ax ** par.nu
    worst = np.zeros_like(X)
    for slope in (alpha, -alpha, 0.0):
        ratio = np.abs(dHdx + dHdy * slope) / np.abs(fprime)
        worst = np.maximum(worst, ratio)
    k = np.unravel_index(np.argmax(worst), worst.shape)
    target = SQRT2 * alpha / par.lambda0
    worst_ratio = float(worst[k])
    return ConeReport(alpha, target, worst_ratio, (float(X[k]), float(Y[k])), int(X.size),
                      worst_ratio <= target * (1 + 1e-9) and worst_ratio <= alpha,
                      params_hash(par))


@dataclass
class AxiomReport:
    checks: list
    K: float
    map_report: object
    params_hash: str

    @property
    def valid(self):
        return all(c.passed for c in self.checks) and self.map_report.valid

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        return self.map_report.check(name)

    def to_dict(self):
        return {"valid": self.valid, "K": self.K, "params_hash": self.params_hash,
                "checks": [c.to_dict() for c in self.checks],
                "map": self.map_report.to_dict()}


def check_lorenz_axioms(params, grid_size: int = 100) -> AxiomReport:
    fmap = as_map(params)
    p = fmap.params
    checks = []
    l1, l2, l3 = p.lambda1, p.lambda2, p.lambda3
    order = min(l2 - l1, -l2, l3)
    checks.append(Check("eigen_order", l1 < l2 < 0 < l3, order, "l1 < l2 < 0 < l3"))
    checks.append(Check("l1_plus_l3_negative", l1 + l3 < 0, -(l1 + l3), f"l1+l3 = {l1 + l3:g}"))
    checks.append(Check("l2_plus_l3_positive", l2 + l3 > 0, l2 + l3, f"l2+l3 = {l2 + l3:g}"))
    coh = max(abs(p.rho + l2 / l3), abs(p.nu + l1 / l3))
    checks.append(Check("exponent_coherence", coh <= 1e-12, -coh, "rho=-l2/l3, nu=-l1/l3"))
    checks.append(Check("r0_positive", p.r0 > 0, p.r0))

    # closed-form suprema over [-1,1]^2: |dH/dy| = b|x|^nu <= b, |dH/dx| <= nu b
    sup_hy = abs(p.b)
    K = p.nu * abs(p.b)
    checks.append(Check("sup_dHdy_lt_1", sup_hy < 1.0, 1.0 - sup_hy, f"sup|dH/dy| = {sup_hy:g}"))
    checks.append(Check("sup_dHdx_bounded", math.isfinite(K), 1.0 - K, f"K = sup|dH/dx| = {K:g}"))

    # H < 0 for x > 0: worst case y = 1, x = 1 gives -c + b
    sign_margin = p.c - p.b
    xs = np.linspace(-1.0, 1.0, grid_size)
    xs = xs[np.abs(xs) >= GRID_EXCLUSION]
    ys = np.linspace(-1.0, 1.0, grid_size)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    H = -np.sign(X) * p.c + p.b * Y * np.abs(X) ** p.nu
    grid_sign = float(np.min(-np.sign(X) * H))
    sign_margin = min(sign_margin, grid_sign)
    checks.append(Check("H_sign_pattern", sign_margin > 0, sign_margin,
                        "H<0 for x>0, H>0 for x<0"))
    # |H| <= c + b < 1 gives the image inside [-1,1] x (-1,1)
    img = 1.0 - (p.c + p.b)
    img = min(img, 1.0 - float(np.max(np.abs(H))))
    checks.append(Check("image_in_section", img > 0, img, "P(Sigma minus l) in [-1,1]x(-1,1)"))
    grid_hy = float(np.max(p.b * np.abs(X) ** p.nu))
    checks.append(Check("grid_dHdy", grid_hy < 1.0, 1.0 - grid_hy))
    return AxiomReport(checks, K, validate_map(fmap), params_hash(p))


# ---------------------------------------------------------------------------
# cube-and-tube orbit traces


@dataclass(frozen=True)
class CubeSegment:
    t0: float
    sign: float
    logx: float
    y: float
    duration: float
    rates: tuple  # (lambda3, lambda1, lambda2)

    def positions(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float) - self.t0
        l3, l1, l2 = self.rates
        return np.stack([self.sign * np.exp(self.logx + l3 * t),
                         self.y * np.exp(l1 * t),
                         np.exp(l2 * t)], axis=-1)

    @property
    def start(self):
        return self.positions(self.t0)

    @property
    def end(self):
        return self.positions(self.t0 + self.duration)


@dataclass(frozen=True)
class TubeSegment:
    t0: float
    start: tuple
    end: tuple
    duration: float

    def positions(self, t) -> np.ndarray:
        u = (np.asarray(t, dtype=float) - self.t0) / self.duration
        a = np.asarray(self.start)
        b = np.asarray(self.end)
        return a + np.multiply.outer(u, b - a)


@dataclass
class OrbitTrace:
    segments: list = field(default_factory=list)
    points: list = field(default_factory=list)  # section points visited, incl. the last landing

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def landing(self) -> SectionPoint:
        return self.points[-1]

    def positions(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 3))
        bounds = np.cumsum([0.0] + [s.duration for s in self.segments])
        idx = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if mask.any():
                out[mask] = seg.positions(t[mask])
        return out

    def sample(self, per_segment: int = 50):
        rows = []
        for seg in self.segments:
            ts = seg.t0 + np.linspace(0.0, seg.duration, per_segment)
            for t, xi in zip(ts, seg.positions(ts)):
                rows.append((float(t), *map(float, xi)))
        return rows

    def to_csv(self, per_segment: int = 50) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "xi1", "xi2", "xi3"])
        for row in self.sample(per_segment):
            w.writerow([repr(v) for v in row])
        return buf.getvalue()

    def extend(self, other: "OrbitTrace"):
        offset = self.duration
        for seg in other.segments:
            self.segments.append(_shift(seg, offset))
        self.points.extend(other.points[1:] if self.points else other.points)


def _shift(seg, offset):
    if isinstance(seg, CubeSegment):
        return CubeSegment(seg.t0 + offset, seg.sign, seg.logx, seg.y, seg.duration, seg.rates)
    return TubeSegment(seg.t0 + offset, seg.start, seg.end, seg.duration)


def cube_dwell(params: ModelParams, p: SectionPoint) -> float:
    if p.logx > 0:
        raise InputError("cube passages need |x| <= 1")
    return -p.logx / params.lambda3


def one_return_trace(params, p, t0: float = 0.0) -> OrbitTrace:
    fmap = as_map(params)
    par = fmap.params
    p = _point(p)
    if p.on_leaf():
        raise DomainError("the orbit of a point on the stable leaf never returns")
    T = cube_dwell(par, p)
    cube = CubeSegment(t0, p.sign, p.logx, p.y, T, (par.lambda3, par.lambda1, par.lambda2))
    exit_pt = tuple(float(v) for v in cube.end)
    exit_pt = (p.sign, exit_pt[1], exit_pt[2])
    land = eval_P(fmap, p)
    tube = TubeSegment(t0 + T, exit_pt, (land.x, land.y, 1.0), par.r0)
    return OrbitTrace([cube, tube], [p, land])


def orbit_trace(params, p, n_returns: int) -> OrbitTrace:
    fmap = as_map(params)
    trace = OrbitTrace()
    q = _point(p)
    for _ in range(n_returns):
        step = one_return_trace(fmap, q, trace.duration)
        if not trace.points:
            trace.points.append(q)
        trace.segments.extend(step.segments)
        trace.points.append(step.landing)
        q = step.landing
    return trace


def trace_of_points(params, points, t0: float = 0.0) -> OrbitTrace:
    """Concatenate one-return traces starting at each given point.

    Used for periodic orbits, where consecutive points are known to high
    accuracy and re-iterating the map would amplify rounding.
    """
    fmap = as_map(params)
    trace = OrbitTrace()
    t = t0
    for q in points:
        step = one_return_trace(fmap, q, t)
        trace.segments.extend(step.segments)
        trace.points.append(q)
        t += step.duration
    trace.points.append(step.landing)
    return trace


TestFunction = Union[int, Callable[[np.ndarray], np.ndarray]]


def _resolve(g: TestFunction):
    if callable(g):
        return g
    if isinstance(g, (int, np.integer)) and 0 <= g < dictionary.SIZE:
        return lambda pts, k=int(g): dictionary.evaluate(k, pts)
    raise KeyError(f"test function {g!r} is not registered")


def integrate_test_function(trace: OrbitTrace, g: TestFunction, epsabs: float = 1e-11) -> float:
    """Time integral of g along the piecewise path by adaptive quadrature."""
    func = _resolve(g)
    total = 0.0
    for seg in trace.segments:
        if seg.duration <= 0:
            continue
        h = lambda t, seg=seg: float(func(seg.positions(np.array([t])))[0])
        pts = None
        if isinstance(seg, CubeSegment):
            pts = _cube_breakpoints(seg)
        val, _ = quad(h, seg.t0, seg.t0 + seg.duration, epsabs=epsabs, epsrel=1e-12,
                      limit=500, points=pts)
        total += val
    return total


def _cube_breakpoints(seg: CubeSegment):
    # kinks of the hat function where |xi| crosses the radius
    win = cube_hat_window(seg)
    if win is None:
        return None
    a, b = win
    inside = [t for t in (a, b) if seg.t0 < t < seg.t0 + seg.duration]
    return inside or None


def cube_hat_window(seg: CubeSegment, radius: float = dictionary.HAT_RADIUS):
    """Time interval (absolute) where the cube path is inside the hat ball, or None."""
    T = seg.duration
    if T <= 0:
        return None
    l3, l1, l2 = seg.rates

    def sq(t):
        return (math.exp(2 * (seg.logx + l3 * t)) + seg.y ** 2 * math.exp(2 * l1 * t)
                + math.exp(2 * l2 * t))

    # |xi|^2 is a sum of exponentials, hence convex in t
    res = minimize_scalar(sq, bounds=(0.0, T), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, T)})
    tm = float(res.x)
    r2 = radius ** 2
    if sq(tm) >= r2:
        return None
    a = 0.0 if sq(0.0) < r2 else brentq(lambda t: sq(t) - r2, 0.0, tm, xtol=1e-15)
    b = T if sq(T) < r2 else brentq(lambda t: sq(t) - r2, tm, T, xtol=1e-15)
    return (seg.t0 + a, seg.t0 + b)


# ---------------------------------------------------------------------------
# closed-form return integrals of the dictionary (the atom route)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_MONO = np.array(dictionary.MONOMIALS, dtype=float)


def _exp_integral(log_scale: float, k: float, T: float) -> float:
    """exp(log_scale) * int_0^T e^{k t} dt, stable for tiny scales and k ~ 0."""
    if T == 0.0:
        return 0.0
    if k == 0.0:
        return math.exp(log_scale) * T
    kT = k * T
    if abs(kT) < 700.0:
        return math.exp(log_scale) * math.expm1(kT) / k
    return (math.exp(log_scale + kT) - math.exp(log_scale)) / k


def cube_monomial_integrals(params: ModelParams, p: SectionPoint) -> np.ndarray:
    """int_0^T xi1^a xi2^b xi3^c dt for every monomial of degree <= 3."""
    T = cube_dwell(params, p)
    logx = p.logx
    out = np.empty(len(dictionary.MONOMIALS))
    for m, (a, b, c) in enumerate(dictionary.MONOMIALS):
        k = a * params.lambda3 + b * params.lambda1 + c * params.lambda2
        coef = (p.sign ** a) * (p.y ** b)
        if coef == 0.0:
            out[m] = 0.0
            continue
        out[m] = coef * _exp_integral(a * logx, k, T)
    return out


def return_integrals(params, p) -> np.ndarray:
    """int over one return from p of every dictionary member (length SIZE)."""
    fmap = as_map(params)
    p = _point(p)
    land = eval_P(fmap, p)
    return batch_return_integrals(fmap.params, [p.sign], [p.logx], [p.y],
                                  [land.x], [land.y])[0]


def _bisect(fun, lo, hi, iters=90):
    """Vectorized bisection for increasing ``fun`` with fun(lo) <= 0 <= fun(hi)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = fun(mid) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return 0.5 * (lo + hi)


_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(12)
PANEL_LENGTH = 0.5


def _panel_quad(fun, a, b, owner, n_out):
    """sum over owners of int_a^b fun(t, owner) by composite Gauss-Legendre."""
    length = b - a
    keep = length > 0
    a, length, owner = a[keep], length[keep], owner[keep]
    out = np.zeros(n_out)
    if not a.size:
        return out
    npan = np.maximum(1, np.ceil(length / PANEL_LENGTH).astype(int))
    h = length / npan
    pan_owner = np.repeat(np.arange(a.size), npan)
    first = np.cumsum(npan) - npan
    pan_index = np.arange(pan_owner.size) - np.repeat(first, npan)
    starts = a[pan_owner] + pan_index * h[pan_owner]
    hh = h[pan_owner]
    t = starts[:, None] + 0.5 * hh[:, None] * (_PANEL_NODES[None, :] + 1.0)
    vals = fun(t, owner[pan_owner][:, None])
    contrib = 0.5 * hh * (vals @ _PANEL_WEIGHTS)
    np.add.at(out, owner[pan_owner], contrib)
    return out


def _cube_hat_batch(par: ModelParams, logx, y, T):
    """int of the hat over each cube segment: window by bisection, panel quadrature."""
    R2 = dictionary.HAT_RADIUS ** 2
    l3, l1, l2 = par.lambda3, par.lambda1, par.lambda2
    y2 = y * y
    n = logx.size
    idx = np.arange(n)

    def sq(t, i):
        return np.exp(2 * (logx[i] + l3 * t)) + y2[i] * np.exp(2 * l1 * t) + np.exp(2 * l2 * t)

    def dsq(t, i):
        return (2 * l3 * np.exp(2 * (logx[i] + l3 * t)) + 2 * l1 * y2[i] * np.exp(2 * l1 * t)
                + 2 * l2 * np.exp(2 * l2 * t))

    with np.errstate(over="ignore", under="ignore"):
        tm = _bisect(lambda t: dsq(t, idx), np.zeros(n), T)
        tm = np.where(dsq(np.zeros(n), idx) >= 0, 0.0, tm)
        inside = sq(tm, idx) < R2
        out = np.zeros(n)
        if not inside.any():
            return out
        j = idx[inside]
        tmj, Tj = tm[inside], T[inside]
        a = _bisect(lambda t: R2 - sq(t, j), np.zeros(j.size), tmj)
        b = _bisect(lambda t: sq(t, j) - R2, tmj, Tj)
        R = dictionary.HAT_RADIUS
        fun = lambda t, i: 1.0 - np.sqrt(sq(t, i)) / R
        owner = np.concatenate([j, j])
        part = _panel_quad(fun, np.concatenate([a, tmj]), np.concatenate([tmj, b]), owner, n)
    return part


def _tube_hat_batch(A, D, duration):
    R = dictionary.HAT_RADIUS
    qa = np.einsum("ij,ij->i", D, D)
    qb = 2 * np.einsum("ij,ij->i", A, D)
    qc = np.einsum("ij,ij->i", A, A)
    out = np.zeros(qa.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = qb * qb - 4 * qa * (qc - R * R)
        ok = (disc > 0) & (qa > 0)
        r = np.sqrt(np.where(ok, disc, 0.0))
        u0 = np.clip((-qb - r) / (2 * qa), 0.0, 1.0)
        u1 = np.clip((-qb + r) / (2 * qa), 0.0, 1.0)
        ok &= u1 > u0
        h = qb / (2 * qa)
        m2 = np.maximum(qc / qa - h * h, 0.0)
        m = np.sqrt(m2)

        def F(u):
            w = u + h
            s = np.sqrt(w * w + m2)
            tail = np.where(m > 0, m2 * np.arcsinh(w / np.where(m > 0, m, 1.0)), 0.0)
            return 0.5 * (w * s + tail)

        val = duration * ((u1 - u0) - np.sqrt(qa) * (F(u1) - F(u0)) / R)
    out[ok] = val[ok]
    return out


def _exp_integral_batch(log_scale, k, T):
    """exp(log_scale) int_0^T e^{k t} dt, elementwise, k scalar."""
    if k == 0.0:
        return np.exp(log_scale) * T
    kT = k * T
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        small = np.exp(log_scale) * np.expm1(kT) / k
        big = (np.exp(log_scale + kT) - np.exp(log_scale)) / k
    return np.where(np.abs(kT) < 1.0, small, big)


def batch_return_integrals(par: ModelParams, sign, logx, y, land_x, land_y) -> np.ndarray:
    """Return integrals of the dictionary for many section points at once.

    Polynomial members use exponential closed forms in the cube and exact
    Gauss-Legendre in the tube.  The hat uses its sub-level window in the cube
    (composite Gauss-Legendre) and an asinh antiderivative in the tube.
    Result shape (N, SIZE).
    """
    sign = np.asarray(sign, dtype=float)
    logx = np.asarray(logx, dtype=float)
    y = np.asarray(y, dtype=float)
    land_x = np.asarray(land_x, dtype=float)
    land_y = np.asarray(land_y, dtype=float)
    if np.any(logx > 0):
        raise InputError("cube passages need |x| <= 1")
    T = -logx / par.lambda3
    n = logx.size
    mono = np.empty((n, len(dictionary.MONOMIALS)))
    for m, (a, b, c) in enumerate(dictionary.MONOMIALS):
        k = a * par.lambda3 + b * par.lambda1 + c * par.lambda2
        mono[:, m] = sign ** a * y ** b * _exp_integral_batch(a * logx, k, T)
    with np.errstate(under="ignore"):
        ex2 = y * np.exp(par.nu * logx)
        ex3 = np.exp(par.rho * logx)
    A = np.stack([sign, ex2, ex3], axis=1)
    B = np.stack([land_x, land_y, np.ones(n)], axis=1)
    D = B - A
    u = 0.5 * (_GL_NODES + 1.0)
    pts = A[:, None, :] + u[None, :, None] * D[:, None, :]
    for m, e in enumerate(_MONO):
        mono[:, m] += 0.5 * par.r0 * (np.prod(pts ** e, axis=2) @ _GL_WEIGHTS)
    out = np.empty((n, dictionary.SIZE))
    out[:, 1:] = mono @ dictionary.MONO_COEFF[1:].T
    out[:, 0] = _cube_hat_batch(par, logx, y, T) + _tube_hat_batch(A, D, par.r0)
    return out


def closest_approach(trace: OrbitTrace) -> float:
    """min |Xi(t)| along a trace (distance to the singularity)."""
    best = math.inf
    for seg in trace.segments:
        if isinstance(seg, CubeSegment):
            T = seg.duration
            f = lambda t: float(np.sum(seg.positions(seg.t0 + t) ** 2))
            if T > 0:
                res = minimize_scalar(f, bounds=(0.0, T), method="bounded",
                                      options={"xatol": 1e-12 * max(1.0, T)})
                cand = min(f(float(res.x)), f(0.0), f(T))
            else:
                cand = f(0.0)
        else:
            A = np.asarray(seg.start)
            D = np.asarray(seg.end) - A
            u = 0.0 if D @ D == 0 else min(1.0, max(0.0, -float(A @ D) / float(D @ D)))
            cand = float(np.sum((A + u * D) ** 2))
        best = min(best, math.sqrt(cand))
    return best
