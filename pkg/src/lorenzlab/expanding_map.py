"""One-dimensional Lorenz expanding maps.

The default family is ``f(x) = sign(x) (mu |x|**rho - 1)``.  A map may carry
smoothstep bumps near x = -1 and x = +1 (the one-parameter perturbations used
by :mod:`lorenzlab.connecting`); everything here works for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DepthCapError, DomainError, InputError
from .params import SQRT2, ModelParams, params_hash

BISECT_RTOL = 1e-14
DEFAULT_DEPTH_CAP = 64


def smoothstep_bump(u):
    """B(u) = 1 - (3u^2 - 2u^3) with u clamped to [0, 1]; B(0)=1, B(1)=0."""
    u = min(max(u, 0.0), 1.0)
    return 1.0 - (3.0 * u * u - 2.0 * u ** 3)


def smoothstep_bump_prime(u):
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return -6.0 * u + 6.0 * u * u


BUMP_PRIME_SUP = 1.5


@dataclass(frozen=True)
class Bump:
    """Additive perturbation ``+/- s B(.)`` supported next to x = -1 or x = +1.

    side '+' pushes up near x = -1 (the landing point of the unstable branch
    through z+); side '-' pushes down near x = +1.
    """

    side: str
    eta: float
    s: float

    def __post_init__(self):
        if self.side not in ("+", "-"):
            raise InputError(f"bump side must be '+' or '-', got {self.side!r}")
        if not self.eta > 0:
            raise InputError("bump half-width eta must be positive")

    def u(self, x):
        return (x + 1.0) / self.eta if self.side == "+" else (1.0 - x) / self.eta

    def value(self, x):
        sign = 1.0 if self.side == "+" else -1.0
        return sign * self.s * smoothstep_bump(self.u(x))

    def d_dx(self, x):
        # d/dx of sign*s*B(u(x)); u' = +1/eta for '+', -1/eta for '-'
        return self.s * smoothstep_bump_prime(self.u(x)) / self.eta

    def d_ds(self, x):
        sign = 1.0 if self.side == "+" else -1.0
        return sign * smoothstep_bump(self.u(x))

    def support(self):
        if self.side == "+":
            return (-1.0, -1.0 + self.eta)
        return (1.0 - self.eta, 1.0)


class LorenzMap:
    """The quotient map f, optionally with bumps, plus its branch calculus.

    ``branch(sym, x)`` evaluates the monotone branch on its closed domain, so
    ``branch('R', 0.0) == -1`` and ``branch('L', 0.0) == 1`` are the one-sided
    limits at the discontinuity.
    """

    def __init__(self, params: ModelParams, bumps: Sequence[Bump] = ()):
        self.params = params
        self.bumps = tuple(b for b in bumps if b.s != 0.0)

    def __repr__(self):
        return f"LorenzMap({self.params!r}, bumps={self.bumps!r})"

    @property
    def perturbed(self) -> bool:
        return bool(self.bumps)

    def with_bumps(self, bumps: Iterable[Bump]) -> "LorenzMap":
        return LorenzMap(self.params, tuple(bumps))

    # -- pointwise evaluation -------------------------------------------------
    def _core(self, x):
        p = self.params
        if x > 0:
            return p.mu * x ** p.rho - 1.0
        return 1.0 - p.mu * (-x) ** p.rho

    def branch(self, sym: str, x: float) -> float:
        p = self.params
        if sym == "R":
            v = p.mu * max(x, 0.0) ** p.rho - 1.0
        else:
            v = 1.0 - p.mu * max(-x, 0.0) ** p.rho
        for bump in self.bumps:
            v += bump.value(x)
        return v

    def f(self, x: float) -> float:
        if x == 0:
            raise DomainError("f is undefined on the stable leaf x = 0")
        v = self._core(x)
        for bump in self.bumps:
            v += bump.value(x)
        return v

    def df(self, x: float) -> float:
        if x == 0:
            raise DomainError("f' is undefined on the stable leaf x = 0")
        p = self.params
        v = p.mu * p.rho * abs(x) ** (p.rho - 1.0)
        for bump in self.bumps:
            v += bump.d_dx(x)
        return v

    def compose(self, word: str, x: float) -> float:
        """Apply branches along ``word``; equals f^len(word)(x) on the cylinder."""
        for sym in word:
            x = self.branch(sym, x)
        return x

    def branch_range(self, sym: str) -> tuple[float, float]:
        """Closed image of the branch over its domain [0,1] or [-1,0]."""
        if sym == "R":
            return (self.branch("R", 0.0), self.branch("R", 1.0))
        return (self.branch("L", -1.0), self.branch("L", 0.0))

    def inverse(self, sym: str, y: float) -> float:
        """Preimage of y under the branch ``sym``; y must lie in its range."""
        lo, hi = self.branch_range(sym)
        if not (lo - 1e-15 <= y <= hi + 1e-15):
            raise InputError(f"{y} outside range of branch {sym}")
        y = min(max(y, lo), hi)
        p = self.params
        if not self.bumps:
            if sym == "R":
                return ((y + 1.0) / p.mu) ** (1.0 / p.rho)
            return -((1.0 - y) / p.mu) ** (1.0 / p.rho)
        a, b = (0.0, 1.0) if sym == "R" else (-1.0, 0.0)
        g = lambda t: self.branch(sym, t) - y
        ga, gb = g(a), g(b)
        if ga >= 0:
            return a
        if gb <= 0:
            return b
        return brentq(g, a, b, xtol=1e-16, rtol=8.9e-16, maxiter=200)

    def orbit(self, x0: float, n: int) -> np.ndarray:
        """x0, f(x0), ..., f^{n-1}(x0); truncated if an iterate is exactly 0."""
        out = np.empty(n)
        x = x0
        for i in range(n):
            out[i] = x
            if x == 0.0:
                return out[: i + 1]
            x = self.f(x)
        return out


def as_map(obj) -> LorenzMap:
    if isinstance(obj, LorenzMap):
        return obj
    if isinstance(obj, ModelParams):
        return LorenzMap(obj)
    raise InputError(f"expected ModelParams or LorenzMap, got {type(obj).__name__}")


def eval_f(params, x: float) -> float:
    return as_map(params).f(x)


def eval_f_prime(params, x: float) -> float:
    return as_map(params).df(x)


# ---------------------------------------------------------------------------
# validity of the family


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "margin": float(self.margin),
                "detail": self.detail}


@dataclass
class ValidityReport:
    checks: list
    params_hash: str
    min_slope: float
    grid_points: int

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"valid": self.valid, "min_slope": self.min_slope,
                "grid_points": self.grid_points, "params_hash": self.params_hash,
                "checks": [c.to_dict() for c in self.checks]}


def _grid(lo, hi, n):
    xs = np.linspace(lo, hi, n)
    return xs[xs != 0.0]


def validate_map(params, grid_points: int = 10_000, domain=None) -> ValidityReport:
    """Check the Lorenz expanding map axioms with analytic margins and a grid.

    Works for perturbed maps as well; there the closed-form minima are replaced
    by the grid values (the bumps are smooth with bounded derivative).
    """
    fmap = as_map(params)
    p = fmap.params
    lo, hi = domain if domain is not None else (-1.0, 1.0)
    checks = []

    ok_rho = 0.0 < p.rho < 1.0
    checks.append(Check("rho_in_(0,1)", ok_rho, min(p.rho, 1.0 - p.rho),
                        "f' -> +inf at 0 needs rho < 1"))

    # one-sided limits at 0: f(0+) = -1, f(0-) = +1 (bumps vanish near 0)
    lim_plus = fmap.branch("R", 0.0)
    lim_minus = fmap.branch("L", 0.0)
    err = max(abs(lim_plus + 1.0), abs(lim_minus - 1.0))
    checks.append(Check("limits_at_0", err <= 1e-15, -err, "f(0+)=-1, f(0-)=+1"))

    xs = _grid(lo, hi, grid_points)
    fx = np.array([fmap.f(x) for x in xs])
    dfx = np.array([fmap.df(x) for x in xs])

    # each branch is increasing: the R branch peaks at x = hi, the L branch
    # bottoms out at x = lo; the limits +-1 at 0 are not attained
    right = xs[xs > 0]
    left = xs[xs < 0]
    sup_f = max(fmap.f(hi), max((fmap.f(x) for x in right[-3:]), default=-1.0))
    inf_f = min(fmap.f(lo), min((fmap.f(x) for x in left[:3]), default=1.0))
    if fmap.perturbed or not ok_rho:
        min_slope = float(dfx.min())
    else:
        # f' = mu rho |x|^(rho-1) decreases in |x| for rho < 1
        edge = max(abs(lo), abs(hi))
        min_slope = min(p.mu * p.rho * edge ** (p.rho - 1.0), float(dfx.min()))
    range_margin = min(1.0 - sup_f, inf_f + 1.0)
    checks.append(Check("image_in_(-1,1)", range_margin > 0, range_margin,
                        f"sup f = {sup_f:.12g} at the right end, inf f = {inf_f:.12g} at the left end"))
    checks.append(Check("slope_gt_sqrt2", min_slope > SQRT2, min_slope - SQRT2,
                        f"min f' = {min_slope:.12g}"))
    finite = bool(np.all(np.isfinite(fx)) and np.all(np.isfinite(dfx)))
    checks.append(Check("C1_away_from_0", finite, 0.0 if finite else -1.0,
                        "f, f' finite on the grid"))
    return ValidityReport(checks, params_hash(p), float(min_slope), len(xs))


def extend_map(params: ModelParams) -> ModelParams:
    """Stamp the params with the extended domain [-1-eps, 1+eps] after re-checking."""
    p = params
    eps = p.eps_ext
    if eps < 0:
        raise InputError("eps_ext must be non-negative")
    if p.mu * (1.0 + eps) ** p.rho - 1.0 >= 1.0:
        raise InputError(
            f"extension eps={eps} violates f(1+eps) < 1; "
            f"max admissible eps = {max_extension(p):.6g}")
    report = validate_map(p, domain=(-1.0 - eps, 1.0 + eps))
    if not report.valid:
        bad = [c.name for c in report.checks if not c.passed]
        raise InputError(f"extended map fails {bad}")
    return p.replace(extended=True)


def max_extension(params: ModelParams) -> float:
    """Largest eps with mu (1+eps)^rho = 2."""
    return (2.0 / params.mu) ** (1.0 / params.rho) - 1.0


# ---------------------------------------------------------------------------
# interval iteration


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InputError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise InputError(f"degenerate interval ({self.lo}, {self.hi})")

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo < x < self.hi


@dataclass(frozen=True)
class Branch:
    """A component of J minus D_n with its (open) image under f^n."""

    depth: int
    domain: tuple
    image: tuple
    word: str

    def to_dict(self):
        return {"depth": self.depth, "domain": list(self.domain), "image": list(self.image),
                "word": self.word}


@dataclass
class BranchDecomposition:
    n: int
    cuts: list
    branches: list
    monotone: bool = True

    def images(self):
        return [b.image for b in self.branches]


def _split_branch(fmap: LorenzMap, br: Branch) -> list:
    a, b = br.domain
    c, d = br.image
    n = br.depth + 1
    if c < 0.0 < d:
        if br.depth == 0:
            t = 0.0
        else:
            g = lambda x: fmap.compose(br.word, x)
            t = brentq(g, a, b, xtol=BISECT_RTOL * max(abs(a), abs(b), 1e-300),
                       rtol=8.9e-16, maxiter=500)
        left = Branch(n, (a, t), (fmap.branch("L", c), fmap.branch("L", 0.0)), br.word + "L")
        right = Branch(n, (t, b), (fmap.branch("R", 0.0), fmap.branch("R", d)), br.word + "R")
        return [left, right]
    sym = "L" if d <= 0.0 else "R"
    return [Branch(n, (a, b), (fmap.branch(sym, c), fmap.branch(sym, d)), br.word + sym)]


def _initial_branch(J: Interval) -> Branch:
    return Branch(0, (J.lo, J.hi), (J.lo, J.hi), "")


def iterate_interval(params, J: Interval, n: int) -> BranchDecomposition:
    """Exact branch decomposition of J under f^n.

    Cuts are found by bisection on the monotone branches; branch images that
    abut a cut (or a preimage of 0) get the one-sided limits +-1 exactly.
    """
    if not isinstance(J, Interval):
        J = Interval(*J)
    if n < 1:
        raise InputError("depth n must be >= 1")
    fmap = as_map(params)
    branches = [_initial_branch(J)]
    for _ in range(n):
        branches = [child for br in branches for child in _split_branch(fmap, br)]
    return _decomposition(n, branches)


def _decomposition(n, branches):
    cuts = sorted(br.domain[0] for br in branches[1:])
    return BranchDecomposition(n, cuts, branches)


def covering_sweep(intervals, lo=-1.0, hi=1.0):
    """Greedy cover of the open interval (lo, hi) by open intervals.

    Returns the indices used, or None if the union misses a point.  Touching
    endpoints do not count as covered.
    """
    order = sorted(range(len(intervals)), key=lambda i: intervals[i][0])
    reach = lo
    closed_start = True  # (lo, .) is open at lo so an interval starting at lo is enough
    used = []
    k = 0
    while reach < hi:
        best, best_hi = None, reach
        while k < len(order) and (intervals[order[k]][0] < reach
                                  or (closed_start and intervals[order[k]][0] <= reach)):
            i = order[k]
            if intervals[i][1] > best_hi:
                best, best_hi = i, intervals[i][1]
            k += 1
        if best is None:
            return None
        used.append(best)
        reach = best_hi
        closed_start = False
    return used


@dataclass
class OntoCertificate:
    N: int
    branches: list
    params_hash: str
    interval: tuple
    cut_counts: list = field(default_factory=list)
    pieces: list = field(default_factory=list)

    def to_dict(self):
        return {"N": self.N, "interval": list(self.interval),
                "branches": [{"depth": b.depth, "domain": list(b.domain),
                              "image": list(b.image)} for b in self.branches],
                "cut_counts": list(self.cut_counts),
                "params_hash": self.params_hash}


def onto_certificate(params, J, depth_cap: int = DEFAULT_DEPTH_CAP) -> OntoCertificate:
    """Smallest N with the union of f^i(J), i = 0..N, covering (-1, 1).

    ``cut_counts[m]`` is #D_m for the tracked depths, which callers compare
    against the counting bound #D_{2n} <= 2^n - 1.
    """
    if not isinstance(J, Interval):
        J = Interval(*J)
    fmap = as_map(params)
    if J.lo < 0.0 < J.hi and not (J.lo <= -1.0 and J.hi >= 1.0):
        # the one-sided pieces are certified separately
        left = onto_certificate(fmap, Interval(J.lo, 0.0), depth_cap)
        right = onto_certificate(fmap, Interval(0.0, J.hi), depth_cap)
        worst = max(left, right, key=lambda c: c.N)
        return OntoCertificate(worst.N, worst.branches, worst.params_hash, (J.lo, J.hi),
                               worst.cut_counts, [left, right])
    branches = [_initial_branch(J)]
    images = [(J.lo, J.hi)]
    owners = [branches[0]]
    cut_counts = [0]
    for depth in range(depth_cap + 1):
        used = covering_sweep(images)
        if used is not None:
            chosen = sorted((owners[i] for i in used), key=lambda b: b.image[0])
            return OntoCertificate(depth, chosen, params_hash(fmap.params), (J.lo, J.hi),
                                   cut_counts)
        branches = [child for br in branches for child in _split_branch(fmap, br)]
        cut_counts.append(len(branches) - 1)
        images.extend(b.image for b in branches)
        owners.extend(branches)
    raise DepthCapError(
        f"no cover of (-1,1) within depth {depth_cap}",
        {"interval": [J.lo, J.hi], "branches": len(branches), "cut_counts": cut_counts})


def analytic_onto_bound(params, width: float) -> int:
    """2 ceil(log(2/|J|)/log(lambda0^2/2)) + 2 from the expansion argument."""
    lam0 = as_map(params).params.lambda0
    return 2 * math.ceil(math.log(2.0 / width) / math.log(lam0 ** 2 / 2.0)) + 2
