"""Flow-invariant measures at desk scale.

A suspended measure is stored by its section atoms and section weights; the
flow weight of an atom is its section weight times its roof time.  Integrals
against the test dictionary use the closed-form return integrals, so a
measure is summarised by a vector of 21 numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import dictionary
from .errors import DepthCapError, InputError, LorenzLabError
from .expanding_map import as_map
from .params import params_hash
from .return_map import (SectionPoint, batch_return_integrals, eval_P, integrate_test_function,
                         trace_of_points)
from .symbolic import (HorseshoeCert, build_horseshoe, find_periodic, itinerary_of)


class FlowMeasure:
    """Weighted section atoms suspended by the roof, plus an optional mass at sigma.

    ``sigma_mass`` is the flow mass of the singular atom; the suspended part
    carries the remaining ``1 - sigma_mass``.  ``weights`` may be a callable
    so that large families sharing one atom bank stay cheap.
    """

    def __init__(self, x=(), y=(), logx=None, weights=(), roofs=None, atom_integrals=None,
                 sigma_mass: float = 0.0, integrals=None, meta: Optional[dict] = None):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.logx = (np.log(np.abs(self.x)) if logx is None
                     else np.asarray(logx, dtype=float))
        self._weights = weights
        self.roofs = roofs
        self.atom_integrals = atom_integrals
        self.sigma_mass = float(sigma_mass)
        self._integrals = None if integrals is None else np.asarray(integrals, dtype=float)
        self.meta = dict(meta or {})

    # -- construction ------------------------------------------------------
    @classmethod
    def delta_sigma(cls) -> "FlowMeasure":
        return cls(sigma_mass=1.0, integrals=dictionary.at_sigma(), meta={"variant": "atomic"})

    @classmethod
    def from_points(cls, params, points, weights=None, meta=None) -> "FlowMeasure":
        fmap = as_map(params)
        par = fmap.params
        pts = [p if isinstance(p, SectionPoint) else SectionPoint(*p) for p in points]
        if not pts:
            raise InputError("a suspended measure needs at least one atom")
        sign = np.array([p.sign for p in pts])
        logx = np.array([p.logx for p in pts])
        y = np.array([p.y for p in pts])
        lands = [eval_P(fmap, p) for p in pts]
        I = batch_return_integrals(par, sign, logx, y, [q.x for q in lands],
                                   [q.y for q in lands])
        roofs = par.r0 - logx / par.lambda3
        w = np.full(len(pts), 1.0 / len(pts)) if weights is None else np.asarray(weights, float)
        if np.any(w <= 0) or not math.isclose(float(w.sum()), 1.0, rel_tol=1e-9):
            raise InputError("section weights must be positive and sum to 1")
        x = np.array([p.x for p in pts])
        info = {"variant": "suspended", "params_hash": params_hash(par)}
        info.update(meta or {})
        return cls(x, y, logx, w, roofs, I, 0.0, meta=info)

    # -- evaluation --------------------------------------------------------
    @property
    def is_atomic(self) -> bool:
        return self.sigma_mass == 1.0 and self.x.size == 0

    @property
    def weights(self) -> np.ndarray:
        w = self._weights
        return w() if callable(w) else np.asarray(w, dtype=float)

    @property
    def flow_weights(self) -> np.ndarray:
        """Flow mass of each atom's return segment (sums to 1 - sigma_mass)."""
        wr = self.weights * self.roofs
        return (1.0 - self.sigma_mass) * wr / wr.sum()

    def mean_roof(self) -> float:
        return float(np.dot(self.weights, self.roofs))

    def integrals(self) -> np.ndarray:
        if self._integrals is None:
            w = self.weights
            susp = (w @ self.atom_integrals) / float(np.dot(w, self.roofs))
            self._integrals = ((1.0 - self.sigma_mass) * susp
                               + self.sigma_mass * dictionary.at_sigma())
        return self._integrals

    def integral(self, k: int) -> float:
        return float(self.integrals()[k])

    def __len__(self):
        return int(self.x.size)

    # -- export ------------------------------------------------------------
    def header(self, seed=None) -> dict:
        h = {"variant": self.meta.get("variant", "suspended"),
             "params_hash": self.meta.get("params_hash"), "seed": seed,
             "sigma_mass": self.sigma_mass, "atoms": len(self)}
        for key in ("word", "t", "n_returns"):
            if key in self.meta:
                h[key] = self.meta[key]
        return h

    def to_csv(self, seed=None) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header(seed), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "weight"])
        for xi, yi, wi in zip(self.x, self.y, self.weights if len(self) else []):
            w.writerow([repr(float(xi)), repr(float(yi)), repr(float(wi))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = self.header()
        d["integrals"] = [float(v) for v in self.integrals()]
        return d


def weak_star_distance(m1: FlowMeasure, m2: FlowMeasure) -> float:
    diff = np.abs(m1.integrals() - m2.integrals())
    return float(np.dot(dictionary.WEIGHTS, diff))


def delta_sigma() -> FlowMeasure:
    return FlowMeasure.delta_sigma()


def periodic_flow_measure(params, word: str) -> FlowMeasure:
    fmap = as_map(params)
    orb = find_periodic(fmap, word)
    m = FlowMeasure.from_points(fmap, orb.points, meta={"variant": "periodic", "word": word})
    m.meta["period"] = orb.period
    m.meta["multiplier"] = orb.multiplier
    return m


def periodic_trace_integrals(params, word: str) -> np.ndarray:
    """Dictionary integrals of the periodic measure by quadrature along the full trace."""
    fmap = as_map(params)
    orb = find_periodic(fmap, word)
    trace = trace_of_points(fmap, orb.points)
    return np.array([integrate_test_function(trace, k) for k in range(dictionary.SIZE)]) / trace.duration


def _orbit(fmap, p: SectionPoint, n: int):
    pts = [p]
    for _ in range(n):
        q = pts[-1]
        if q.x == 0.0:
            break
        pts.append(eval_P(fmap, q))
    return pts


def empirical_flow_measure(params, x0, n_returns: int) -> FlowMeasure:
    """Time average along n returns starting at x0 (atoms are the visited points)."""
    if n_returns < 1:
        raise InputError("n_returns must be >= 1")
    fmap = as_map(params)
    p = x0 if isinstance(x0, SectionPoint) else SectionPoint(*x0)
    pts = _orbit(fmap, p, n_returns)
    truncated = len(pts) < n_returns + 1 or pts[-1].x == 0.0
    atoms = [q for q in pts[:n_returns] if q.x != 0.0]
    m = FlowMeasure.from_points(fmap, atoms, meta={"variant": "empirical",
                                                   "n_returns": len(atoms)})
    m.meta["truncated"] = truncated
    m.meta["orbit_x"] = [q.x for q in pts]
    return m


def random_empirical_measure(params, n_returns: int, seed: int = 0) -> FlowMeasure:
    rng = np.random.default_rng(seed)
    x0 = float(rng.uniform(-1.0, 1.0))
    y0 = float(rng.uniform(-1.0, 1.0))
    m = empirical_flow_measure(params, (x0, y0), n_returns)
    m.meta["seed"] = seed
    return m


def convex_combine(measures, weights) -> FlowMeasure:
    """sum_j alpha_j mu_j as a single atom list (section weights rescaled by mean roofs)."""
    measures = list(measures)
    alpha = np.asarray(weights, dtype=float)
    if len(measures) != alpha.size or not measures:
        raise InputError("need one weight per measure")
    if np.any(alpha <= 0) or not math.isclose(float(alpha.sum()), 1.0, rel_tol=1e-12):
        raise InputError("weights must be positive and sum to 1")
    xs, ys, lx, ws, rs, Is = [], [], [], [], [], []
    sigma = 0.0
    for a, m in zip(alpha, measures):
        sigma += a * m.sigma_mass
        if len(m) == 0 or m.sigma_mass == 1.0:
            continue
        w = m.weights
        scale = a * (1.0 - m.sigma_mass) / float(np.dot(w, m.roofs))
        xs.append(m.x); ys.append(m.y); lx.append(m.logx)
        ws.append(w * scale); rs.append(m.roofs); Is.append(m.atom_integrals)
    integrals = sum(a * m.integrals() for a, m in zip(alpha, measures))
    if not xs:
        return FlowMeasure(sigma_mass=sigma, integrals=integrals, meta={"variant": "atomic"})
    w = np.concatenate(ws)
    w = w / w.sum()
    return FlowMeasure(np.concatenate(xs), np.concatenate(ys), np.concatenate(lx), w,
                       np.concatenate(rs), np.concatenate(Is), sigma, integrals,
                       meta={"variant": "combination"})


# ---------------------------------------------------------------------------
# periodic approximation by closing a recurrence window


@dataclass
class Approximation:
    word: str
    distance: float
    window: tuple
    candidates_tried: int
    measure: FlowMeasure = field(repr=False, default=None)

    def to_dict(self):
        return {"word_length": len(self.word), "distance": self.distance,
                "window": list(self.window), "candidates_tried": self.candidates_tried,
                "word_prefix": self.word[:64]}


def _itinerary(xs):
    return "".join("R" if x > 0 else "L" for x in xs)


def approximate_by_periodic(params, target: FlowMeasure, tol: float, margin: int = 500,
                            max_candidates: int = 50, match: int = 12,
                            max_len: int = 10 ** 6) -> Approximation:
    """Close the longest recurrence of the target's orbit and measure the periodic orbit.

    Pairs (i, j) with i near the start and j near the end of the orbit are
    ranked by |x_i - x_j| among those whose next ``match`` symbols agree; the
    word of x_i..x_{j-1} is located as a periodic orbit.
    """
    fmap = as_map(params)
    xs = target.meta.get("orbit_x")
    if xs is None:
        raise InputError("target must be built from a finite orbit")
    xs = np.asarray(xs, dtype=float)
    n = xs.size - 1
    # symbols past the end come from iterating a little further
    ext = list(xs)
    x = ext[-1]
    for _ in range(match):
        if x == 0.0:
            break
        x = fmap.f(x)
        ext.append(x)
    itin = _itinerary(ext)
    m = min(margin, n)
    starts = np.arange(0, m)
    ends = np.arange(max(1, n - m + 1), n + 1)
    diff = np.abs(xs[starts][:, None] - xs[ends][None, :])
    order = np.argsort(diff, axis=None, kind="stable")
    best = None
    tried = 0
    for flat in order:
        i, j = starts[flat // ends.size], ends[flat % ends.size]
        if j <= i or j - i > max_len:
            continue
        if itin[i:i + match] != itin[j:j + match]:
            continue
        tried += 1
        word = itin[i:j]
        try:
            meas = periodic_flow_measure(fmap, word)
        except LorenzLabError:
            if tried >= max_candidates:
                break
            continue
        d = weak_star_distance(meas, target)
        if best is None or d < best.distance:
            best = Approximation(word, d, (int(i), int(j)), tried, meas)
        if d <= tol or tried >= max_candidates:
            break
    if best is None or best.distance > tol:
        diag = best.to_dict() if best else {"candidates_tried": tried}
        raise DepthCapError(f"no periodic measure within {tol} (best {diag.get('distance')})", diag)
    best.candidates_tried = tried
    return best


# ---------------------------------------------------------------------------
# horseshoe measure paths


@dataclass
class BlockTable:
    """Periodic data of every length-m block sequence, one entry per rotation class."""

    cert: HorseshoeCert
    m: int
    n_q: np.ndarray          # number of q-blocks in the class representative
    count: np.ndarray        # class size (number of rotations)
    period: np.ndarray       # flow period of the full word
    steps: np.ndarray        # section length of the full word
    sums: np.ndarray         # sum over the orbit of the return integrals, (classes, SIZE)
    atom_slices: list
    bank: dict

    def weights(self, t: float) -> np.ndarray:
        return self.count * _bernoulli(t, self.n_q, self.m)


def _bernoulli(t, n_q, m):
    if t == 0.0:
        return (n_q == 0).astype(float)
    if t == 1.0:
        return (n_q == m).astype(float)
    return np.exp(n_q * math.log(t) + (m - n_q) * math.log1p(-t))


def _necklaces(m: int):
    """One representative per rotation class of {0,1}^m (the least rotation) and its size."""
    mask = (1 << m) - 1
    for v in range(1 << m):
        rots = {((v << k) | (v >> (m - k))) & mask for k in range(m)}
        if v == min(rots):
            yield tuple((v >> (m - 1 - i)) & 1 for i in range(m)), len(rots)


def choose_depth(params, cert: HorseshoeCert, target: float = 1e-6) -> int:
    """Block depth m so the cyclic-context error stays below ``target``.

    An atom's x is fixed by the future blocks: after k_f of them it is pinned
    to within |hull(I_p, I_q)| Lambda^-k_f, Lambda the smaller block
    multiplier.  Its y is fixed by the past: k_p blocks contract the y-range
    2(c+b) by b^(l k_p), l the shorter block length.  The weighted return
    integrals are Lipschitz in x and y with constants estimated (doubled) at
    the periodic atoms.
    """
    fmap = as_map(params)
    par = fmap.params
    orbs = [find_periodic(fmap, blk) for blk in cert.blocks()]
    lam = min(o.multiplier for o in orbs)
    lmin = min(len(b) for b in cert.blocks())
    lip_x = lip_y = 0.0
    h = 1e-6
    for o in orbs:
        for p in o.points:
            base = FlowMeasure.from_points(fmap, [p]).atom_integrals[0]
            for dx, dy in ((h, 0.0), (0.0, h)):
                q = SectionPoint(p.x + dx, p.y + dy)
                d = FlowMeasure.from_points(fmap, [q]).atom_integrals[0]
                slope = float(np.dot(dictionary.WEIGHTS, np.abs(d - base))) / h
                if dx:
                    lip_x = max(lip_x, 2.0 * slope)
                else:
                    lip_y = max(lip_y, 2.0 * slope)
    width = max(cert.I_p[1], cert.I_q[1]) - min(cert.I_p[0], cert.I_q[0])
    half = 0.5 * target
    k_f = max(1, math.ceil(math.log(lip_x * width / half) / math.log(lam)))
    k_p = max(1, math.ceil(math.log(lip_y * 2 * (par.c + par.b) / half)
                           / (lmin * -math.log(par.b))))
    return k_f + k_p + 1


def block_table(params, cert: HorseshoeCert, m: int) -> BlockTable:
    fmap = as_map(params)
    blocks = cert.blocks()
    n_q, count, period, steps, slices, pts = [], [], [], [], [], []
    for seq, c in _necklaces(m):
        word = "".join(blocks[s] for s in seq)
        orb = find_periodic(fmap, word)
        n_q.append(sum(seq))
        count.append(c)
        period.append(orb.period)
        steps.append(len(word))
        slices.append(slice(len(pts), len(pts) + len(orb.points)))
        pts.extend(orb.points)
    bank_measure = FlowMeasure.from_points(fmap, pts, np.full(len(pts), 1.0 / len(pts)))
    I = bank_measure.atom_integrals
    sums = np.array([I[sl].sum(axis=0) for sl in slices])
    bank = {"x": bank_measure.x, "y": bank_measure.y, "logx": bank_measure.logx,
            "roofs": bank_measure.roofs, "I": I}
    return BlockTable(cert, m, np.array(n_q), np.array(count, float), np.array(period),
                      np.array(steps, float), sums, slices, bank)


def bernoulli_measure(params, table: BlockTable, t: float) -> FlowMeasure:
    """Flow measure of Bernoulli(t) on the block shift (t = probability of the q-block)."""
    if not 0.0 <= t <= 1.0:
        raise InputError("t must lie in [0, 1]")
    cw = table.weights(t)
    integrals = (cw @ table.sums) / float(cw @ table.period)
    bank = table.bank

    def atom_weights():
        w = np.zeros(bank["x"].size)
        for k, sl in enumerate(table.atom_slices):
            if cw[k] > 0:
                w[sl] = cw[k]
        return w / w.sum()

    meta = {"variant": "bernoulli", "t": t, "m": table.m,
            "params_hash": params_hash(as_map(params).params)}
    return FlowMeasure(bank["x"], bank["y"], bank["logx"], atom_weights, bank["roofs"],
                       bank["I"], 0.0, integrals, meta)


@dataclass
class MeasurePath:
    cert: HorseshoeCert
    ts: list
    measures: list
    m: int
    table: BlockTable = field(repr=False, default=None)

    def step_distances(self):
        return [weak_star_distance(a, b) for a, b in zip(self.measures, self.measures[1:])]

    def modulus(self) -> float:
        """C with d(mu_j, mu_{j+1}) <= C / steps on the sampled path."""
        steps = len(self.measures) - 1
        return max(self.step_distances()) * steps

    def __getitem__(self, k):
        return self.measures[k]

    def __len__(self):
        return len(self.measures)

    def to_dict(self):
        d = self.step_distances()
        return {"horseshoe": self.cert.to_dict(), "m": self.m, "steps": len(self.ts) - 1,
                "t": list(self.ts), "step_distances": d, "max_step": max(d),
                "modulus_C": self.modulus()}


def measure_path(params, word_p: str, word_q: str, steps: int, m: int | None = None,
                 table: BlockTable | None = None, cert: HorseshoeCert | None = None) -> MeasurePath:
    if steps < 1:
        raise InputError("steps must be >= 1")
    fmap = as_map(params)
    if table is None:
        cert = cert or build_horseshoe(fmap, word_p, word_q)
        m = m or choose_depth(fmap, cert)
        table = block_table(fmap, cert, m)
    ts = [j / steps for j in range(steps + 1)]
    measures = [bernoulli_measure(fmap, table, t) for t in ts]
    return MeasurePath(table.cert, ts, measures, table.m, table)


# ---------------------------------------------------------------------------
# entropy


@dataclass
class EntropyReport:
    h_map: float
    h_flow: float
    mean_block_length: float
    mean_block_time: float
    spec: str

    @property
    def mean_roof(self) -> float:
        return self.mean_block_time / self.mean_block_length if self.mean_block_length else 0.0

    def to_dict(self):
        return {"spec": self.spec, "h_map": self.h_map, "h_flow": self.h_flow,
                "mean_block_length": self.mean_block_length,
                "mean_block_time": self.mean_block_time, "mean_roof": self.mean_roof}


def _binary_entropy(t: float) -> float:
    if t in (0.0, 1.0):
        return 0.0
    return -t * math.log(t) - (1.0 - t) * math.log1p(-t)


def entropy_of(params, spec) -> EntropyReport:
    """Entropy of a periodic word (exactly 0) or of ('bernoulli', t, table_or_cert).

    Bernoulli(t) on the block shift has entropy H(t) per block; dividing by
    the mean block length gives the map entropy and by the mean block flow
    time the flow entropy.  Both means use the cylinder-weighted averaging of
    the block table.
    """
    if isinstance(spec, str):
        find_periodic(params, spec)
        return EntropyReport(0.0, 0.0, float(len(spec)), find_periodic(params, spec).period,
                             f"periodic:{spec}")
    kind, t, src = spec
    if kind != "bernoulli":
        raise InputError(f"unknown measure spec {kind!r}")
    if not (isinstance(t, (int, float)) and 0.0 <= t <= 1.0):
        raise InputError("t must lie in [0, 1]")
    t = float(t)
    if isinstance(src, BlockTable):
        cw = src.weights(t)
        mass = float(cw.sum()) * src.m
        mean_len = float(cw @ src.steps) / mass
        mean_time = float(cw @ src.period) / mass
    else:
        cert = src
        lp, lq = len(cert.block_p), len(cert.block_q)
        mean_len = (1.0 - t) * lp + t * lq
        orbs = [find_periodic(params, b) for b in cert.blocks()]
        mean_time = (1.0 - t) * orbs[0].period + t * orbs[1].period
    H = _binary_entropy(t)
    return EntropyReport(H / mean_len, H / mean_time, mean_len, mean_time, f"bernoulli:{t}")


# ---------------------------------------------------------------------------
# support coverage


@dataclass
class CoverageReport:
    eps: float
    cells: int
    covered: int

    @property
    def fraction(self) -> float:
        return self.covered / self.cells

    def to_dict(self):
        return {"eps": self.eps, "cells": self.cells, "covered": self.covered,
                "fraction": self.fraction}


def support_coverage(params, measure: FlowMeasure, eps: float) -> CoverageReport:
    """Fraction of eps-cells of [-1,1] x [-c-b, c+b] whose centre is eps-close to an atom.

    Distances use the max-norm, so eps >= 2 covers everything.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    if len(measure) == 0:
        raise InputError("coverage needs a suspended measure")
    par = as_map(params).params
    ylim = par.c + par.b
    nx = max(1, math.ceil(2.0 / eps))
    ny = max(1, math.ceil(2.0 * ylim / eps))
    cx = -1.0 + (np.arange(nx) + 0.5) * (2.0 / nx)
    cy = -ylim + (np.arange(ny) + 0.5) * (2.0 * ylim / ny)
    centres = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
    atoms = np.stack([measure.x, measure.y], axis=1)
    w = measure.weights
    atoms = atoms[w > 0]
    tree = cKDTree(atoms)
    d, _ = tree.query(centres, k=1, p=np.inf)
    covered = int(np.sum(d <= eps))
    return CoverageReport(eps, centres.shape[0], covered)
