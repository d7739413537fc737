"""Command-line front end.

Every command writes its artifacts under ``--out`` (default: the
``SIGMA_GEOM_OUT`` environment variable, else the working directory).
Options may also come from a flat ``key = value`` file given with
``--config``; flags on the command line win.

Exit codes: 0 success, 1 result did not match ``--expect``, 2 bad
configuration or input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .core import Skeleton, Vector, WorldFunction
from .distorted import segment_profile, simulate_worldline, wobble_statistics
from .envelopes import EnvelopeObject, sample_envelope
from .errors import (
    ContractViolation, InsufficientSamples, NotMetricCandidate, SigmaGeomError,
)
from .predicates import (
    DirectionGrid, check_metric_axioms, degeneracy_classify, is_collinear,
    is_parallel_same_direction,
)
from .verify import CONDITIONS, verify_euclidean

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
GEOMETRIES = ("euclidean", "minkowski", "distorted", "quartic")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- output helpers

def fmt(x) -> str:
    return format(float(x), ".17g")


def dump_json(obj, indent: int = 0) -> str:
    """JSON with sorted keys and every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dump_json(obj[k], indent + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + ", ".join(dump_json(v, indent + 1) for v in seq) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt(v) if math.isfinite(v) else json.dumps(str(v))
    return json.dumps(str(obj))


def out_dir(args) -> Path:
    root = args.out or os.environ.get("SIGMA_GEOM_OUT") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------- inputs

def read_config(path) -> dict:
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{num}: empty key")
        cfg[key.replace("-", "_")] = val
    return cfg


def read_points(path, dim: int | None = None) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot parse points file {path}: {exc}") from exc
    if pts.size == 0:
        raise ConfigError(f"points file {path} is empty")
    if dim is not None and pts.shape[1] != dim:
        raise ConfigError(f"points have {pts.shape[1]} coordinates, geometry has {dim}")
    if not np.all(np.isfinite(pts)):
        raise ConfigError("points must be finite")
    return pts


def quartic_sigma(p, q):
    """A symmetric, nonnegative test sigma that breaks the triangle inequality."""
    return 0.5 * np.sum((p - q) ** 2, axis=-1) ** 2


def build_geometry(args, dim: int | None = None) -> WorldFunction:
    kind = args.geometry
    n = args.dim if args.dim is not None else dim
    if kind == "euclidean":
        return WorldFunction.euclidean(3 if n is None else n)
    if kind == "minkowski":
        return WorldFunction.minkowski(args.c, 4 if n is None else n)
    if kind == "distorted":
        return WorldFunction.distorted(args.d, args.sigma0, args.c, 4 if n is None else n)
    if kind == "quartic":
        return WorldFunction.custom(quartic_sigma, 1 if n is None else n, name="quartic")
    raise ConfigError(f"unknown geometry {kind!r}")


def spacetime_geometry(args) -> WorldFunction:
    """Distorted geometry for the link commands; minkowski means d = 0."""
    if args.geometry not in ("distorted", "minkowski"):
        raise ConfigError("this command needs --geometry distorted or minkowski")
    d = 0.0 if args.geometry == "minkowski" else args.d
    return WorldFunction.distorted(d, args.sigma0, args.c, 4 if args.dim is None else args.dim)


def parse_box(text: str, dim: int) -> np.ndarray:
    try:
        rows = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad box {text!r}: {exc}") from exc
    if len(rows) != dim or any(len(r) != 2 for r in rows):
        raise ConfigError(f"box needs {dim} entries of the form lo:hi")
    return np.array(rows)


# ---------------------------------------------------------------- commands

def cmd_verify_euclidean(args) -> int:
    g = build_geometry(args)
    n = args.n if args.n is not None else g.dim
    if args.points < n + 2:
        raise ConfigError("need at least n + 2 sample points")
    rep = verify_euclidean(g, n, n_samples=args.points, box=(args.box_lo, args.box_hi),
                           seed=args.seed, tol=args.tol)
    data = rep.to_dict()
    data["geometry"] = g.describe()
    data["n"] = n
    data["seed"] = args.seed
    data["points"] = args.points
    dest = out_dir(args) / "verify_report.json"
    write_text(dest, dump_json(data))
    for k in CONDITIONS:
        c = rep.conditions[k]
        print(f"condition {k:>3}: {'pass' if c.passed else 'FAIL'}  max residual {fmt(c.max_residual)}")
    print(f"inferred dimension: {rep.inferred_dimension}  overall: {'pass' if rep.overall else 'FAIL'}")
    print(f"report: {dest}")
    met = expectation_met(args.expect, rep)
    if not met:
        print(f"expectation {args.expect!r} not met (failed: {rep.failed() or 'none'})")
    return EXIT_OK if met else EXIT_MISMATCH


def expectation_met(expect: str, rep) -> bool:
    if expect == "any":
        return True
    if expect == "pass":
        return rep.overall
    if expect == "fail":
        return not rep.overall
    if expect.startswith("fail-"):
        want = {s.strip() for s in expect[5:].split(",")}
        if not want <= set(CONDITIONS):
            raise ConfigError(f"unknown condition in --expect {expect!r}")
        return set(rep.failed()) == want
    raise ConfigError(f"bad --expect value {expect!r}")


def cmd_tube_profile(args) -> int:
    g = spacetime_geometry(args)
    if args.n_tau < 1 or not 0 < args.tau_min <= args.tau_max < 1:
        raise ConfigError("need n-tau >= 1 and 0 < tau-min <= tau-max < 1")
    taus = np.linspace(args.tau_min, args.tau_max, args.n_tau)
    prof = segment_profile(g, args.mu_d, taus, grid=max(args.grid, 8), sampled=args.grid > 0)
    dest = out_dir(args) / "tube_profile.csv"
    cols = ["tau", "r_closed", "r_numeric"] + (["r_sampled"] if args.grid > 0 else [])
    lines = [",".join(cols)]
    for i, tau in enumerate(prof.tau_grid):
        row = [tau, prof.r_closed[i], prof.r_numeric[i]]
        if args.grid > 0:
            row.append(prof.r_sampled[i])
        lines.append(",".join(fmt(v) for v in row))
    write_text(dest, "\n".join(lines))
    mid = int(np.argmin(np.abs(taus - 0.5)))
    print(f"r(tau={fmt(taus[mid])}) closed {fmt(prof.r_closed[mid])} numeric {fmt(prof.r_numeric[mid])}")
    print(f"profile: {dest}")
    return EXIT_OK


def cmd_simulate_worldline(args) -> int:
    g = spacetime_geometry(args)
    if args.links < 2:
        raise ConfigError("need at least two links")
    tube = simulate_worldline(g, args.seed, args.links, args.mu_d)
    stats = wobble_statistics(tube).to_dict()
    stats.update(d=g.d, sigma0=g.sigma0, c=g.c, mu_d=args.mu_d,
                 final_rapidity=tube.params["final_rapidity"],
                 max_residual_length=float(np.max(np.abs(tube.residual_length))),
                 max_residual_parallel=float(np.max(np.abs(tube.residual_parallel))))
    root = out_dir(args)
    tube.to_csv(root / "chain.csv")
    write_text(root / "stats.json", dump_json(stats))
    print(f"links {tube.n_links}  mean cosh {fmt(stats['mean_cosh'])}  "
          f"theta rms {fmt(stats['theta_rms'])}  predicted theta {fmt(stats['predicted_theta'])}")
    print(f"chain: {root / 'chain.csv'}  stats: {root / 'stats.json'}")
    return EXIT_OK


def cmd_predicates(args) -> int:
    pts = read_points(args.points_file, args.dim)
    g = build_geometry(args, dim=pts.shape[1])
    if g.dim != pts.shape[1]:
        raise ConfigError("points file does not match geometry dimension")
    need = {"collinear": 3, "parallel": 4, "degeneracy": 3, "metric-axioms": 2}[args.query]
    if len(pts) < need:
        raise ConfigError(f"query {args.query} needs {need} points, file has {len(pts)}")
    report = {"query": args.query, "geometry": g.describe()}
    if args.query == "collinear":
        v = is_collinear(g, pts[0], pts[1], pts[2], tol=args.tol)
        report.update(result=v.ok, residual=v.residual)
    elif args.query == "parallel":
        v = is_parallel_same_direction(g, Vector.of(pts[0], pts[1]), Vector.of(pts[2], pts[3]),
                                       tol=args.tol)
        report.update(result=v.ok, residual=v.residual)
    elif args.query == "degeneracy":
        if args.a is None or not args.a > 0:
            raise ConfigError("degeneracy needs --a > 0")
        v = degeneracy_classify(g, pts[0], pts[1], pts[2], args.a,
                                DirectionGrid(resolution=args.resolution))
        report.update(result=v.verdict, solution_count=v.solution_count,
                      witnesses=[w.tolist() for w in v.witnesses], capped=v.capped)
    else:
        try:
            m = check_metric_axioms(g, pts, tol=args.tol)
        except NotMetricCandidate as exc:
            report.update(result="not_metric_candidate", reason=str(exc))
        else:
            report.update(result=m.all_ok, identity=m.identity_ok, symmetry=m.symmetry_ok,
                          nonnegativity=m.nonnegativity_ok, triangle=m.triangle_ok,
                          witnesses=[{"axiom": a, "indices": list(i), "residual": r}
                                     for a, i, r in m.violation_witnesses])
    dest = out_dir(args) / "predicates.json"
    text = dump_json(report)
    write_text(dest, text)
    print(text)
    return EXIT_OK


def cmd_sample_envelope(args) -> int:
    pts = read_points(args.points_file, args.dim)
    g = build_geometry(args, dim=pts.shape[1])
    kind = args.object
    if kind == "sphere":
        obj = EnvelopeObject.sphere(pts[0], pts[1])
    elif kind == "ellipsoid":
        if args.a is None:
            raise ConfigError("ellipsoid needs --a")
        obj = EnvelopeObject.ellipsoid(pts[0], pts[1], args.a)
    elif kind == "segment":
        obj = EnvelopeObject.segment(pts[0], pts[1])
    elif kind == "tube":
        obj = EnvelopeObject.tube(pts[0], pts[1])
    elif kind == "coordinate_tube":
        obj = EnvelopeObject.coordinate_tube(pts[0], Skeleton(pts[1:]))
    else:
        obj = EnvelopeObject.broken_tube(pts)
    box = parse_box(args.box, g.dim) if args.box else None
    cloud = sample_envelope(g, obj, box, args.grid, args.tol)
    dest = out_dir(args) / "envelope.csv"
    cloud.to_csv(dest)
    print(f"{len(cloud)} points on the {kind} (tol {fmt(cloud.tol)}): {dest}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def common_options(**defaults) -> argparse.ArgumentParser:
    """Shared options; a fresh parent per command keeps defaults separate."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--out", help="output directory (default $SIGMA_GEOM_OUT or .)")
    common.add_argument("--geometry", choices=GEOMETRIES, default="euclidean")
    common.add_argument("--dim", type=int, help="number of coordinate labels")
    common.add_argument("--c", type=float, default=1.0, help="speed of light")
    common.add_argument("--d", type=float, default=0.0, help="distortion")
    common.add_argument("--sigma0", type=float, default=1e-3, help="distortion threshold")
    common.set_defaults(**defaults)
    return common


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigma-geom", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-euclidean", parents=[common_options()],
                       help="check conditions I-V on a random sample")
    p.add_argument("--n", type=int, help="dimension to test (default: --dim)")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--box-lo", type=float, default=-10.0)
    p.add_argument("--box-hi", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--expect", default="pass",
                   help="pass, fail, any, or fail-<conditions> e.g. fail-IV or fail-II,III")
    p.set_defaults(func=cmd_verify_euclidean)

    p = sub.add_parser("tube-profile",
                       parents=[common_options(geometry="distorted", d=0.01)],
                       help="segment radius against the length fraction tau")
    p.add_argument("--mu-d", type=float, default=1.0)
    p.add_argument("--n-tau", type=int, default=19)
    p.add_argument("--tau-min", type=float, default=0.05)
    p.add_argument("--tau-max", type=float, default=0.95)
    p.add_argument("--grid", type=int, default=0,
                   help="also sample the envelope on this grid (0: skip)")
    p.set_defaults(func=cmd_tube_profile)

    p = sub.add_parser("simulate-worldline",
                       parents=[common_options(geometry="distorted", d=0.005, sigma0=5e-4)],
                       help="seeded chain of mutually parallel equal links")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--links", type=_positive_int, default=1000)
    p.add_argument("--mu-d", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate_worldline)

    p = sub.add_parser("predicates", parents=[common_options()],
                       help="collinearity, parallelism, degeneracy or metric axioms")
    p.add_argument("--points-file", required=True)
    p.add_argument("--query", choices=("collinear", "parallel", "degeneracy", "metric-axioms"),
                   default="collinear")
    p.add_argument("--a", type=float, help="radius for the degeneracy query")
    p.add_argument("--resolution", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_predicates)

    p = sub.add_parser("sample-envelope", parents=[common_options()],
                       help="sample an object's zero set")
    p.add_argument("--points-file", required=True, help="defining points, one per row")
    p.add_argument("--object", default="sphere",
                   choices=("sphere", "ellipsoid", "segment", "tube", "coordinate_tube",
                            "broken_tube"))
    p.add_argument("--a", type=float)
    p.add_argument("--box", help="lo:hi per axis, comma separated")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_sample_envelope)
    return ap


def _subparser(ap, name):
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(name)
    return None


def parse_args(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sp = _subparser(ap, args.command)
        known = {a.dest for a in sp._actions}
        bad = sorted(set(cfg) - known - {"config"})
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        sp.set_defaults(**{k: v for k, v in cfg.items() if k != "config"})
        args = ap.parse_args(argv)
        for action in sp._actions:
            val = getattr(args, action.dest, None)
            if action.choices is not None and isinstance(val, str) and val not in action.choices:
                raise ConfigError(f"{action.dest}={val!r} not one of {sorted(action.choices)}")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except (ConfigError, ContractViolation, InsufficientSamples) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SigmaGeomError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
