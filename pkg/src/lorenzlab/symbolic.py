"""Itineraries, cylinders, periodic orbits, horseshoes and homoclinic witnesses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .errors import (DepthCapError, InadmissibleWordError, InputError,
                     NoPeriodicPointError)
from .expanding_map import (DEFAULT_DEPTH_CAP, Branch, Interval, LorenzMap,
                            _split_branch, as_map)
from .return_map import SectionPoint, eval_H

GRAZE_TOL = 1e-14
H_CYCLES = 50
# beyond this length the pullback cylinder is narrower than float spacing
BISECTION_MAX_LEN = 40


def flip(word: str) -> str:
    return word.translate(str.maketrans("LR", "RL"))


def _check_word(word: str) -> str:
    if not word or set(word) - {"L", "R"}:
        raise InputError(f"word must be a nonempty string over L,R; got {word!r}")
    return word


@dataclass(frozen=True)
class Itinerary:
    word: str
    hit_zero: bool = False

    def __str__(self):
        return self.word

    def __len__(self):
        return len(self.word)


def itinerary_of(params, x: float, n: int) -> Itinerary:
    fmap = as_map(params)
    out = []
    for _ in range(n):
        if abs(x) <= GRAZE_TOL:
            return Itinerary("".join(out), True)
        out.append("R" if x > 0 else "L")
        x = fmap.f(x)
    return Itinerary("".join(out), False)


@dataclass(frozen=True)
class KneadingData:
    kPlus: str
    kMinus: str
    depth: int

    def to_dict(self):
        return {"kPlus": self.kPlus, "kMinus": self.kMinus, "depth": self.depth}


def kneading(params, depth: int = 30) -> KneadingData:
    """Itineraries of the critical values -1 = f(0+) and +1 = f(0-)."""
    fmap = as_map(params)
    return KneadingData(itinerary_of(fmap, -1.0, depth).word,
                        itinerary_of(fmap, 1.0, depth).word, depth)


def _pull_interval(fmap: LorenzMap, sym: str, lo: float, hi: float):
    """Preimage of [lo, hi] under the branch ``sym``, or None."""
    rlo, rhi = fmap.branch_range(sym)
    a, b = max(lo, rlo), min(hi, rhi)
    if a >= b:
        return None
    return fmap.inverse(sym, a), fmap.inverse(sym, b)


def cylinder_of(params, word: str):
    """Maximal interval of points with itinerary ``word``; None if inadmissible.

    Backward pullback of branch domains.  The endpoint 0 is never part of a
    cylinder, so the result is open at a zero endpoint.
    """
    _check_word(word)
    fmap = as_map(params)
    lo, hi = (0.0, 1.0) if word[-1] == "R" else (-1.0, 0.0)
    for sym in reversed(word[:-1]):
        pulled = _pull_interval(fmap, sym, lo, hi)
        if pulled is None:
            return None
        lo, hi = pulled
        if lo >= hi:
            return None
    return Interval(lo, hi)


@dataclass
class PeriodicOrbit:
    word: str
    points: list
    multiplier: float
    period: float

    @property
    def point(self) -> SectionPoint:
        return self.points[0]

    def __iter__(self):
        yield self.point
        yield self.multiplier

    def to_dict(self):
        return {"word": self.word, "x": self.point.x, "y": self.point.y,
                "multiplier": self.multiplier, "period": self.period,
                "orbit": [p.to_list() for p in self.points]}


def _pull_cycle(fmap: LorenzMap, word: str, x0: float) -> list:
    """x_{l-1}, ..., x_1 from x_0 by inverse branches (contracting), in forward order."""
    pts = [0.0] * len(word)
    pts[0] = x0
    x = x0
    for i in range(len(word) - 1, 0, -1):
        x = fmap.inverse(word[i], x)
        pts[i] = x
    return pts


def _root_by_bisection(fmap: LorenzMap, word: str) -> float:
    cyl = cylinder_of(fmap, word)
    if cyl is None:
        raise InadmissibleWordError(f"word {word} has an empty cylinder")
    g = lambda x: fmap.compose(word, x) - x
    ga, gb = g(cyl.lo), g(cyl.hi)
    if ga * gb > 0:
        raise NoPeriodicPointError(
            f"f^{len(word)} - id has no sign change on the cylinder of {word}")
    if ga == 0:
        return cyl.lo
    if gb == 0:
        return cyl.hi
    return brentq(g, cyl.lo, cyl.hi, xtol=1e-16, rtol=8.9e-16, maxiter=500)


def _root_by_contraction(fmap: LorenzMap, word: str) -> float:
    """Fixed point of the composed inverse branches (rate <= lambda0^-l per cycle)."""
    x = 0.5 if word[0] == "R" else -0.5
    for _ in range(200):
        prev = x
        for sym in reversed(word):
            lo, hi = fmap.branch_range(sym)
            x = fmap.inverse(sym, min(max(x, lo), hi))
        if x == prev:
            break
    return x


def find_periodic(params, word: str) -> PeriodicOrbit:
    """Periodic orbit of P with the given itinerary.

    x solves f^l(x) = x on the cylinder of the word; y is the fixed point of
    the contracting H-cycle along the orbit.
    """
    _check_word(word)
    fmap = as_map(params)
    par = fmap.params
    if len(word) <= BISECTION_MAX_LEN:
        x0 = _root_by_bisection(fmap, word)
    else:
        x0 = _root_by_contraction(fmap, word)
    xs = _pull_cycle(fmap, word, x0)
    for i, (x, sym) in enumerate(zip(xs, word)):
        if abs(x) <= GRAZE_TOL or (x > 0) != (sym == "R"):
            raise InadmissibleWordError(
                f"orbit of {word} leaves its cylinder at position {i} (x={x:.3g})")
    if abs(fmap.f(xs[-1]) - x0) > 1e-9 * max(1.0, abs(fmap.df(xs[-1]))) and len(word) <= BISECTION_MAX_LEN:
        raise NoPeriodicPointError(f"no periodic point found for {word}")
    y = 0.0
    for _ in range(H_CYCLES):
        prev = y
        for x in xs:
            y = eval_H(par, x, y)
        if y == prev:
            break
    ys = []
    for x in xs:
        ys.append(y)
        y = eval_H(par, x, y)
    multiplier = math.prod(fmap.df(x) for x in xs)
    period = sum(par.roof(x) for x in xs)
    return PeriodicOrbit(word, [SectionPoint(x, yy) for x, yy in zip(xs, ys)], multiplier,
                         period)


def periodic_residuals(params, orbit: PeriodicOrbit) -> tuple[float, float]:
    fmap = as_map(params)
    x0, y0 = orbit.point.x, orbit.point.y
    rx = abs(fmap.compose(orbit.word, x0) - x0)
    y = y0
    for p in orbit.points:
        y = eval_H(fmap.params, p.x, y)
    return rx, abs(y - y0)


def cycle_residual(params, orbit: PeriodicOrbit) -> float:
    """max |f(x_i) - x_{i+1}| around the cycle.

    For long words the forward residual of f^l grows like the multiplier times
    the rounding of x, so this per-step check is the meaningful one.
    """
    fmap = as_map(params)
    xs = [p.x for p in orbit.points]
    return max(abs(fmap.f(a) - b) for a, b in zip(xs, xs[1:] + xs[:1]))


# ---------------------------------------------------------------------------
# horseshoes


@dataclass
class HorseshoeCert:
    """Two disjoint intervals whose block returns cover both.

    ``f^{len(block_p)}`` maps I_p monotonically onto an interval containing
    I_p and I_q, and ``f^{len(block_q)}`` does the same for I_q.
    """

    word_p: str
    word_q: str
    k_p: int
    k_q: int
    I_p: tuple
    I_q: tuple
    image_p: tuple
    image_q: tuple
    monotone: tuple = (True, True)

    @property
    def block_p(self) -> str:
        return self.word_p * self.k_p

    @property
    def block_q(self) -> str:
        return self.word_q * self.k_q

    @property
    def n(self) -> int:
        return max(len(self.block_p), len(self.block_q))

    def blocks(self):
        return (self.block_p, self.block_q)

    def to_dict(self):
        return {"word_p": self.word_p, "word_q": self.word_q, "k_p": self.k_p,
                "k_q": self.k_q, "n": self.n, "block_lengths": [len(self.block_p), len(self.block_q)],
                "I_p": list(self.I_p), "I_q": list(self.I_q),
                "image_p": list(self.image_p), "image_q": list(self.image_q),
                "monotone": list(self.monotone)}


def _hull(*ivs):
    ivs = [iv for iv in ivs if iv is not None]
    if not ivs:
        return None
    return (min(iv.lo for iv in ivs), max(iv.hi for iv in ivs))


def _try_horseshoe(fmap, word_p, word_q, k_p, k_q):
    P, Q = word_p * k_p, word_q * k_q
    I_p = _hull(cylinder_of(fmap, P + P), cylinder_of(fmap, P + Q))
    I_q = _hull(cylinder_of(fmap, Q + Q), cylinder_of(fmap, Q + P))
    if I_p is None or I_q is None:
        return None
    if not (I_p[1] < I_q[0] or I_q[1] < I_p[0]):
        return None
    img_p = (fmap.compose(P, I_p[0]), fmap.compose(P, I_p[1]))
    img_q = (fmap.compose(Q, I_q[0]), fmap.compose(Q, I_q[1]))
    lo, hi = min(I_p[0], I_q[0]), max(I_p[1], I_q[1])
    tol = 1e-12
    for img in (img_p, img_q):
        if not (img[0] <= lo + tol and img[1] >= hi - tol):
            return None
    return HorseshoeCert(word_p, word_q, k_p, k_q, I_p, I_q, img_p, img_q)


def build_horseshoe(params, word_p: str, word_q: str, k_p: int | None = None,
                    k_q: int | None = None, max_repeat: int = 12) -> HorseshoeCert:
    """Horseshoe over the blocks p^k_p and q^k_q.

    I_p is the hull of the cylinders of PP and PQ (P = p^k_p, Q = q^k_q): it
    lies in one monotone branch of f^|P| and is carried across both
    intervals.  Fixed repeat counts are honoured; otherwise the smallest
    counts that certify are searched.
    """
    _check_word(word_p)
    _check_word(word_q)
    if word_p == word_q:
        raise InputError("the two words must differ (the horseshoe intervals must be disjoint)")
    fmap = as_map(params)
    find_periodic(fmap, word_p)
    find_periodic(fmap, word_q)
    kps = [k_p] if k_p else range(1, max_repeat + 1)
    kqs = [k_q] if k_q else range(1, max_repeat + 1)
    pairs = sorted(((a, b) for a in kps for b in kqs), key=lambda t: (t[0] * len(word_p) + t[1] * len(word_q), t))
    for a, b in pairs:
        cert = _try_horseshoe(fmap, word_p, word_q, a, b)
        if cert is not None:
            return cert
    raise DepthCapError(f"no horseshoe for ({word_p}, {word_q}) with repeats <= {max_repeat}",
                        {"word_p": word_p, "word_q": word_q, "max_repeat": max_repeat})


def _pull_through_block(fmap, block, lo, hi):
    for sym in reversed(block):
        pulled = _pull_interval(fmap, sym, lo, hi)
        if pulled is None:
            return None
        lo, hi = pulled
    return lo, hi


def horseshoe_point(params, cert: HorseshoeCert, sequence) -> float:
    """A point of I_{s_0} following the interval sequence s_0 s_1 ... (0 = p, 1 = q)."""
    fmap = as_map(params)
    ivs = (cert.I_p, cert.I_q)
    blocks = cert.blocks()
    lo, hi = ivs[sequence[-1]]
    for s in reversed(sequence[:-1]):
        pulled = _pull_through_block(fmap, blocks[s], lo, hi)
        if pulled is None:
            raise InadmissibleWordError("sequence leaves the horseshoe")
        lo, hi = max(pulled[0], ivs[s][0]), min(pulled[1], ivs[s][1])
        if lo > hi:
            raise InadmissibleWordError("sequence leaves the horseshoe")
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# homoclinic witnesses


@dataclass
class HomoclinicWitness:
    word_p: str
    word_q: str
    x_star: float
    n: int
    target: float
    residual: float
    word: str = ""

    def to_dict(self):
        return {"word_p": self.word_p, "word_q": self.word_q, "x_star": self.x_star,
                "n": self.n, "target": self.target, "residual": self.residual,
                "itinerary": self.word}


def verify_witness(params, x_star: float, n: int, target: float, tol: float = 1e-10) -> bool:
    fmap = as_map(params)
    x = x_star
    for _ in range(n):
        x = fmap.f(x)
    return abs(x - target) <= tol


def homoclinic_witness(params, word_p: str, word_q: str, radius: float = 1e-3,
                       depth_cap: int = DEFAULT_DEPTH_CAP) -> HomoclinicWitness:
    """x* next to x_p whose orbit lands exactly on x_q (the stable leaf of q).

    The one-sided interval (x_p, x_p + radius), clipped to the cylinder of p,
    is iterated branch by branch until some image contains x_q; x* is then
    located by bisection on that branch.
    """
    fmap = as_map(params)
    orb_p = find_periodic(fmap, word_p)
    orb_q = find_periodic(fmap, word_q)
    xp, xq = orb_p.point.x, orb_q.point.x
    cyl = cylinder_of(fmap, word_p)
    hi = min(xp + radius, cyl.hi)
    if not hi > xp:
        hi = xp + 0.5 * (cyl.hi - xp)
    U = Interval(xp, hi)
    branches = [Branch(0, (U.lo, U.hi), (U.lo, U.hi), "")]
    for depth in range(1, depth_cap + 1):
        branches = [c for br in branches for c in _split_branch(fmap, br)]
        for br in branches:
            c, d = br.image
            if c < xq < d:
                g = lambda x, w=br.word: fmap.compose(w, x) - xq
                a, b = br.domain
                x_star = brentq(g, a, b, xtol=1e-16, rtol=8.9e-16, maxiter=500)
                if abs(x_star - xp) <= 1e-12:
                    continue  # x_p itself when q = p
                res = abs(g(x_star))
                return HomoclinicWitness(word_p, word_q, x_star, depth, xq, res, br.word)
    raise DepthCapError(f"no witness for ({word_p}, {word_q}) within depth {depth_cap}",
                        {"branches": len(branches)})
