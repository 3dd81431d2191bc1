"""Hand-written SVG 1.1 figures with byte-stable output."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import InputError
from .expanding_map import as_map

KINDS = ("map", "trace", "path", "loop")

W, H, PAD = 480, 360, 48


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Canvas:
    def __init__(self, title: str, xlim, ylim, xlabel: str, ylabel: str):
        self.xlim, self.ylim = xlim, ylim
        self.items = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def sx(self, x):
        a, b = self.xlim
        return PAD + (x - a) / (b - a) * (W - 2 * PAD)

    def sy(self, y):
        a, b = self.ylim
        return H - PAD - (y - a) / (b - a) * (H - 2 * PAD)

    def polyline(self, xs, ys, color="#1f4e9c", width=1.5):
        pts = " ".join(f"{_fmt(self.sx(x))},{_fmt(self.sy(y))}" for x, y in zip(xs, ys))
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
                          f'points="{pts}"/>')

    def dots(self, xs, ys, color="#b02a2a", r=3):
        for x, y in zip(xs, ys):
            self.items.append(f'<circle cx="{_fmt(self.sx(x))}" cy="{_fmt(self.sy(y))}" '
                              f'r="{r}" fill="{color}"/>')

    def render(self) -> str:
        x0, x1 = PAD, W - PAD
        y0, y1 = H - PAD, PAD
        out = ['<?xml version="1.0" encoding="UTF-8"?>',
               f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" '
               f'height="{H}" viewBox="0 0 {W} {H}">',
               f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" '
               'stroke="black"/>',
               f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">'
               f'{escape(self.title)}</text>',
               f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">'
               f'{escape(self.xlabel)}</text>',
               f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {H / 2})">{escape(self.ylabel)}</text>']
        for v, anchor in ((self.xlim[0], x0), (self.xlim[1], x1)):
            out.append(f'<text x="{_fmt(anchor)}" y="{y0 + 16}" text-anchor="middle" '
                       f'font-size="10">{v:.4g}</text>')
        for v, anchor in ((self.ylim[0], y0), (self.ylim[1], y1)):
            out.append(f'<text x="{x0 - 4}" y="{_fmt(anchor + 3)}" text-anchor="end" '
                       f'font-size="10">{v:.4g}</text>')
        out.extend(self.items)
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _pad(lo, hi):
    if hi <= lo:
        return lo - 1.0, hi + 1.0
    d = 0.05 * (hi - lo)
    return lo - d, hi + d


def map_graph(params, samples: int = 400) -> str:
    """Both branches of f with the gap at 0."""
    fmap = as_map(params)
    cv = _Canvas("quotient map f", (-1.0, 1.0), (-1.0, 1.0), "x", "f(x)")
    cv.polyline([-1.0, 1.0], [-1.0, 1.0], color="#999999", width=0.8)
    for xs in (np.linspace(-1.0, 0.0, samples)[:-1], np.linspace(0.0, 1.0, samples)[1:]):
        cv.polyline(xs, [fmap.f(float(x)) for x in xs])
    return cv.render()


def orbit_trace(trace, per_segment: int = 60) -> str:
    """Projection of an ambient trace onto its first and third coordinates."""
    rows = np.array(trace.sample(per_segment))
    a, c = rows[:, 1], rows[:, 3]
    cv = _Canvas("orbit trace", _pad(a.min(), a.max()), _pad(c.min(), c.max()), "xi1", "xi3")
    cv.polyline(a, c)
    cv.dots([0.0], [0.0], color="black")
    return cv.render()


def path_profile(step_distances) -> str:
    d = list(step_distances)
    js = list(range(len(d)))
    cv = _Canvas("measure path step sizes", _pad(0, max(len(d) - 1, 1)), _pad(0.0, max(d)),
                 "j", "d(mu_j, mu_j+1)")
    cv.polyline(js, d)
    return cv.render()


def loop_family(distances) -> str:
    ys = [math.log10(v) for v in distances]
    ks = list(range(len(ys)))
    cv = _Canvas("loop family", _pad(0, max(len(ys) - 1, 1)), _pad(min(ys), max(ys)),
                 "k", "log10 d(mu_k, delta_sigma)")
    cv.polyline(ks, ys)
    cv.dots(ks, ys)
    return cv.render()


def plot(data, kind: str, params=None) -> str:
    if kind == "map":
        return map_graph(params if params is not None else data)
    if kind == "trace":
        return orbit_trace(data)
    if kind == "path":
        return path_profile(data)
    if kind == "loop":
        return loop_family(data)
    raise InputError(f"unsupported plot kind {kind!r}; choose from {', '.join(KINDS)}")
