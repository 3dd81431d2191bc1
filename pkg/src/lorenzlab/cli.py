"""Command-line drivers: one subcommand per experiment, JSON/CSV/SVG reports.

Exit codes: 0 when every check of the report passes, 1 when a mathematical
check fails, 2 on input errors (bad config, bad key, bad value).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Callable

from . import plots
from .connecting import (PerturbationParams, connect, connect_to_orbit, isolation_report,
                         loop_family_csv, loop_periodic_family, track_curve, validate_family)
from .errors import InputError, LorenzLabError
from .expanding_map import Interval, onto_certificate, validate_map
from .measures import (FlowMeasure, approximate_by_periodic, bernoulli_measure, block_table,
                       choose_depth, delta_sigma, entropy_of, measure_path,
                       periodic_flow_measure, random_empirical_measure, support_coverage,
                       weak_star_distance)
from .params import CONE_ALPHA, ModelParams, params_hash
from .return_map import check_cone_invariance, check_lorenz_axioms, trace_of_points
from .symbolic import build_horseshoe, find_periodic, homoclinic_witness, kneading, \
    periodic_residuals

MODEL_KEYS = {f.name: f.type for f in dataclasses.fields(ModelParams)}

# every option with its default; the type of the default is the parse type
OPTIONS = {
    "J": "0.10,0.11",            # onto: interval endpoints
    "grid": 100,                 # cone / axioms grid size
    "alpha": CONE_ALPHA,         # cone aperture
    "depth": 30,                 # kneading depth
    "depth_cap": 64,             # onto / connect depth cap
    "word": "RL",                # periodic
    "p": "RL",                   # horseshoe / path
    "q": "RLL",
    "radius": 1e-3,              # homoclinic witness search radius
    "steps": 101,                # path
    "m": 0,                      # block depth, 0 = automatic
    "first": "periodic:RL",      # measure-dist
    "second": "delta",
    "measure": "bernoulli:0.5",  # entropy / support
    "eps": 0.1,                  # support
    "target": "empirical:100000",  # approx
    "tol": 0.05,                 # approx
    "seed": 0,
    "side": "+",                 # connect / loop-lab
    "eta": 0.05,
    "tau": 0.0,                  # 0 = tau_max
    "lambda": 1.43,
    "x_target": "0",             # connect: a coordinate or a periodic word
    "connect_tol": 1e-10,
    "count": 5,                  # loop-lab
    "log_depth0": 250.0,
    "growth": 2.0,
    "target_word": "RL",         # isolation-lab
    "max_len": 12,
    "caps": "8,10,12",
    "probe_decades": 40,
    "plot": True,
}


# ---------------------------------------------------------------------------
# configuration


def _parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        return raw
    except ValueError:
        raise InputError(f"bad value for {key}: {raw!r}") from None


def _kind(key):
    if key in MODEL_KEYS:
        return MODEL_KEYS[key]
    return type(OPTIONS[key])


def parse_pairs(lines, source: str = "config") -> dict:
    """key=value lines with # comments; unknown keys are rejected."""
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{n}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in MODEL_KEYS and key not in OPTIONS:
            raise InputError(f"{source}:{n}: unknown key {key!r}")
        out[key] = _parse_value(key, raw, _kind(key))
    return out


@dataclasses.dataclass
class RunConfig:
    params: ModelParams
    options: dict

    def __getitem__(self, key):
        return self.options[key]

    @classmethod
    def build(cls, pairs: dict) -> "RunConfig":
        model = {k: v for k, v in pairs.items() if k in MODEL_KEYS}
        opts = dict(OPTIONS)
        opts.update({k: v for k, v in pairs.items() if k in OPTIONS})
        return cls(ModelParams(**model), opts)

    def to_dict(self):
        return {"params": self.params.to_dict(), "options": dict(self.options)}


def load_config(path=None, overrides=(), seed=None) -> RunConfig:
    pairs = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                pairs.update(parse_pairs(fh.read().splitlines(), path))
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
    pairs.update(parse_pairs(overrides, "command line"))
    if seed is not None:
        pairs["seed"] = seed
    return RunConfig.build(pairs)


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str, n: int = None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} numbers, got {text!r}")
    return vals


def _measure(cfg: RunConfig, spec: str) -> FlowMeasure:
    """delta | periodic:WORD | bernoulli:T | empirical:N"""
    kind, _, arg = spec.partition(":")
    if kind == "delta":
        return delta_sigma()
    if kind == "periodic":
        return periodic_flow_measure(cfg.params, arg)
    if kind == "bernoulli":
        t = _floats(arg, 1)[0]
        cert = build_horseshoe(cfg.params, cfg["p"], cfg["q"])
        m = cfg["m"] or choose_depth(cfg.params, cert)
        return bernoulli_measure(cfg.params, block_table(cfg.params, cert, m), t)
    if kind == "empirical":
        try:
            n = int(arg)
        except ValueError:
            raise InputError(f"bad sample size in {spec!r}") from None
        return random_empirical_measure(cfg.params, n, cfg["seed"])
    raise InputError(f"unknown measure spec {spec!r}")


def _pert(cfg: RunConfig, side=None) -> PerturbationParams:
    return PerturbationParams(side or cfg["side"], cfg["eta"], cfg["tau"] or None,
                              cfg["lambda"], cfg.params)


# each command returns (report, passed, artifacts {suffix: text})
Result = tuple


def cmd_validate(cfg):
    rep = check_lorenz_axioms(cfg.params, cfg["grid"])
    art = {"svg": plots.map_graph(cfg.params)} if cfg["plot"] else {}
    return rep.to_dict(), rep.valid, art


def cmd_onto(cfg):
    lo, hi = _floats(cfg["J"], 2)
    cert = onto_certificate(cfg.params, Interval(lo, hi), cfg["depth_cap"])
    # #D_2n <= 2^n - 1 holds for J off the stable leaf, before the first cover
    counts = cert.cut_counts
    applies = not lo < 0.0 < hi
    bound_ok = not applies or all(counts[2 * n] <= 2 ** n - 1
                                  for n in range(1, len(counts)) if 2 * n < cert.N)
    rep = cert.to_dict()
    rep["branch_count_bound"] = bound_ok if applies else "not applicable: 0 in J"
    return rep, bound_ok, {}


def cmd_cone(cfg):
    rep = check_cone_invariance(cfg.params, cfg["alpha"], cfg["grid"])
    return rep.to_dict(), rep.passed, {}


def cmd_kneading(cfg):
    return kneading(cfg.params, cfg["depth"]).to_dict(), True, {}


def cmd_periodic(cfg):
    orb = find_periodic(cfg.params, cfg["word"])
    rx, ry = periodic_residuals(cfg.params, orb)
    rep = orb.to_dict()
    rep.update({"residual_x": rx, "residual_y": ry})
    trace = trace_of_points(cfg.params, orb.points)
    art = {"csv": trace.to_csv()}
    if cfg["plot"]:
        art["svg"] = plots.orbit_trace(trace)
    return rep, rx <= 1e-10 and ry <= 1e-10, art


def cmd_horseshoe(cfg):
    cert = build_horseshoe(cfg.params, cfg["p"], cfg["q"])
    rep = cert.to_dict()
    ok = cert.monotone
    wit = []
    for a, b in ((cfg["p"], cfg["q"]), (cfg["q"], cfg["p"])):
        try:
            w = homoclinic_witness(cfg.params, a, b, cfg["radius"], cfg["depth_cap"])
            wit.append(w.to_dict())
            ok = ok and w.residual <= 1e-10
        except LorenzLabError as exc:
            wit.append({"word_p": a, "word_q": b, "error": str(exc)})
            ok = False
    rep["witnesses"] = wit
    return rep, ok, {}


def cmd_measure_dist(cfg):
    ma, mb = _measure(cfg, cfg["first"]), _measure(cfg, cfg["second"])
    d = weak_star_distance(ma, mb)
    return {"first": cfg["first"], "second": cfg["second"], "distance": d}, True, {}


def cmd_path(cfg):
    path = measure_path(cfg.params, cfg["p"], cfg["q"], cfg["steps"], cfg["m"] or None)
    rep = path.to_dict()
    ends = (weak_star_distance(path[0], periodic_flow_measure(cfg.params, path.cert.block_p)),
            weak_star_distance(path[-1], periodic_flow_measure(cfg.params, path.cert.block_q)))
    rep["endpoint_errors"] = list(ends)
    d = rep["step_distances"]
    art = {"csv": "j,t,step_distance\n" + "".join(
        f"{j},{path.ts[j]!r},{v!r}\n" for j, v in enumerate(d))}
    if cfg["plot"]:
        art["svg"] = plots.path_profile(d)
    return rep, max(ends) <= 1e-8, art


def cmd_entropy(cfg):
    spec = cfg["measure"]
    kind, _, arg = spec.partition(":")
    if kind == "periodic":
        rep = entropy_of(cfg.params, arg)
    elif kind == "bernoulli":
        cert = build_horseshoe(cfg.params, cfg["p"], cfg["q"])
        src = cert
        if cfg["m"]:
            src = block_table(cfg.params, cert, cfg["m"])
        rep = entropy_of(cfg.params, ("bernoulli", _floats(arg, 1)[0], src))
    else:
        raise InputError(f"entropy supports periodic:WORD and bernoulli:T, got {spec!r}")
    return rep.to_dict(), True, {}


def cmd_approx(cfg):
    target = _measure(cfg, cfg["target"])
    res = approximate_by_periodic(cfg.params, target, cfg["tol"])
    rep = res.to_dict()
    rep["tol"] = cfg["tol"]
    return rep, res.distance <= cfg["tol"], {}


def _connect_target(cfg, pert):
    raw = cfg["x_target"]
    try:
        return connect(pert, float(raw), cfg["connect_tol"], cfg["depth_cap"])
    except ValueError:
        return connect_to_orbit(pert, raw, cfg["connect_tol"], cfg["depth_cap"])


def cmd_connect(cfg):
    pert = _pert(cfg)
    fam = validate_family(pert)
    res = _connect_target(cfg, pert)
    curve = track_curve(pert, res.n, cfg["depth_cap"])
    rep = {"family": fam.to_dict(), "connection": res.to_dict(), "curve": curve.to_dict()}
    ok = res.residual <= cfg["connect_tol"] and res.valid and res.min_expansion_ratio >= 0.95
    return rep, ok, {}


def cmd_loop_lab(cfg):
    pert = _pert(cfg)
    res = connect(pert, 0.0, cfg["connect_tol"], cfg["depth_cap"])
    fam = loop_periodic_family(pert, res.s_star, res.n, cfg["count"], cfg["log_depth0"],
                               cfg["growth"])
    ca = [o.log10_closest for o in fam]
    ds = [o.d_sigma for o in fam]
    hd = [o.log10_hausdorff for o in fam]
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))
    rep = {"connection": res.to_dict(),
           "orbits": [{"word": o.word, "s": o.s, "period": o.period,
                       "log10_closest_approach": o.log10_closest, "d_to_delta_sigma": o.d_sigma,
                       "log10_hausdorff": o.log10_hausdorff} for o in fam],
           "closest_decreasing": dec(ca), "distance_decreasing": dec(ds),
           "hausdorff_decreasing": dec(hd), "final_distance": ds[-1]}
    art = {"csv": loop_family_csv(fam)}
    if cfg["plot"]:
        art["svg"] = plots.loop_family(ds)
    return rep, dec(ca) and dec(ds) and dec(hd), art


def cmd_isolation_lab(cfg):
    plus, minus = _pert(cfg, "+"), _pert(cfg, "-")
    caps = [int(v) for v in _floats(cfg["caps"])]
    rep = isolation_report(plus, minus, cfg["target_word"], cfg["max_len"], caps,
                           cfg["probe_decades"])
    return rep.to_dict(), rep.passed, {}


def cmd_support(cfg):
    rep = support_coverage(cfg.params, _measure(cfg, cfg["measure"]), cfg["eps"])
    d = rep.to_dict()
    d["measure"] = cfg["measure"]
    return d, True, {}


COMMANDS: dict[str, Callable] = {
    "validate": cmd_validate, "onto": cmd_onto, "cone": cmd_cone, "kneading": cmd_kneading,
    "periodic": cmd_periodic, "horseshoe": cmd_horseshoe, "measure-dist": cmd_measure_dist,
    "path": cmd_path, "entropy": cmd_entropy, "approx": cmd_approx, "connect": cmd_connect,
    "loop-lab": cmd_loop_lab, "isolation-lab": cmd_isolation_lab, "support": cmd_support,
}

HELP = {
    "validate": "check the map and return-map axioms",
    "onto": "certify that J covers (-1, 1) under iteration",
    "cone": "verify cone-field invariance on a grid",
    "kneading": "itineraries of the critical values",
    "periodic": "locate the periodic orbit of a word",
    "horseshoe": "build a two-block horseshoe and homoclinic witnesses",
    "measure-dist": "weak* distance between two measures",
    "path": "Bernoulli measure path between two periodic measures",
    "entropy": "map and flow entropy of a measure",
    "approx": "approximate a measure by a periodic one",
    "connect": "find a parameter connecting the unstable branch to a target",
    "loop-lab": "periodic orbits accumulating on a homoclinic loop",
    "isolation-lab": "gap between periodic measures and the singular atom",
    "support": "grid coverage of a measure's atoms",
}

# ---------------------------------------------------------------------------
# output


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def run(command: str, cfg: RunConfig, out_dir: str) -> tuple[int, dict]:
    """Run one experiment and write its artifacts; returns (exit code, report)."""
    if command not in COMMANDS:
        raise InputError(f"unknown subcommand {command!r}")
    try:
        report, passed, artifacts = COMMANDS[command](cfg)
        code = 0 if passed else 1
    except InputError:
        raise
    except LorenzLabError as exc:
        report = {"error": type(exc).__name__, "message": str(exc),
                  "diagnostic": getattr(exc, "diagnostic", {})}
        passed, artifacts, code = False, {}, 1
    full = {"command": command, "passed": bool(passed), "params_hash": params_hash(cfg.params),
            "config": cfg.to_dict(), "report": report}
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, command)
    with open(stem + ".json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(full))
    for suffix, text in sorted(artifacts.items()):
        with open(f"{stem}.{suffix}", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return code, full


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="lorenzlab", parents=[common],
                                     description="Geometric Lorenz model experiments.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        p.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    quiet = getattr(args, "quiet", False)
    out_dir = getattr(args, "out", "out")
    try:
        cfg = load_config(getattr(args, "config", None), args.overrides,
                          getattr(args, "seed", None))
        code, full = run(args.command, cfg, out_dir)
    except InputError as exc:
        print(f"lorenzlab: input error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    if not quiet:
        status = "PASS" if code == 0 else "FAIL"
        print(f"{args.command}: {status} -> {os.path.join(out_dir, args.command)}.json")
        if "message" in full["report"]:
            print(full["report"]["message"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
