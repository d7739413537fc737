"""Sampled check of the conditions that single out proper Euclidean geometry.

Each condition is tested on a finite sample and reported with its largest
residual and a witness, so a failure says where and by how much. Passing is
evidence, not proof: only sampled points are ever examined.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .core import (
    Skeleton, WorldFunction, as_points, covariant_coordinates, gram_matrix, metric_tensor,
    quadratic_sigma,
)
from .errors import ContractViolation, InsufficientSamples, SingularSkeleton

CONDITIONS = ("I", "II", "III", "IV", "V")


@dataclass
class ConditionResult:
    name: str
    passed: bool
    max_residual: float
    witness: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "max_residual": _jsonable(self.max_residual),
            "witness": _jsonable(self.witness),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _pair_sigma(g: WorldFunction, pts):
    return np.asarray(g(pts[:, None, :], pts[None, :, :]), dtype=float)


def sample_scale2(g: WorldFunction, samples) -> float:
    """Typical squared length of the sample: median |2 sigma| over pairs."""
    pts = as_points(samples, g.dim)
    s = np.abs(2.0 * _pair_sigma(g, pts))
    off = s[~np.eye(len(pts), dtype=bool)]
    m = float(np.median(off)) if off.size else 0.0
    return m if m > 0 else 1.0


def check_symmetry(g: WorldFunction, samples, tol: float = 1e-12) -> ConditionResult:
    pts = as_points(samples, g.dim)
    if len(pts) < 2:
        raise ContractViolation("symmetry needs at least two points")
    s = _pair_sigma(g, pts)
    diff = np.abs(s - s.T)
    bound = tol * (1.0 + np.abs(s))
    i, j = np.unravel_index(np.argmax(diff - bound), diff.shape)
    worst = float(diff.max())
    return ConditionResult("I", bool(np.all(diff <= bound)), worst,
                           [pts[i].tolist(), pts[j].tolist()] if worst > 0 else [])


def best_skeleton(g: WorldFunction, samples, k: int, start: int = 0) -> Skeleton:
    """Greedy skeleton: each new point maximizes |F| of the growing skeleton.

    Gram determinants are normalized by the product of squared lengths so
    nearly orthogonal choices win over merely long ones.
    """
    pts = as_points(samples, g.dim)
    if len(pts) < k + 1:
        raise InsufficientSamples(f"need {k + 1} points for a {k}-skeleton, got {len(pts)}")
    chosen = [start]
    o = pts[start]
    sq = np.abs(2.0 * np.asarray(g(o, pts)))
    for _ in range(k):
        best, best_val = None, -1.0
        for j in range(len(pts)):
            if j in chosen or sq[j] == 0:
                continue
            gm = gram_matrix(g, Skeleton(pts[chosen + [j]]))
            val = abs(np.linalg.det(gm)) / float(np.prod(sq[chosen[1:] + [j]]))
            if val > best_val:
                best, best_val = j, val
        if best is None:
            raise InsufficientSamples("sample has too few distinct points")
        chosen.append(best)
    return Skeleton(pts[chosen])


def gram_determinant_samples(g: WorldFunction, samples, k: int, n_skeletons: int = 10,
                             seed: int = 0) -> np.ndarray:
    """|F_k| on random (k+1)-point skeletons drawn from the sample."""
    pts = as_points(samples, g.dim)
    rng = np.random.default_rng(seed)
    out = np.empty(n_skeletons)
    for m in range(n_skeletons):
        idx = rng.choice(len(pts), size=k + 1, replace=False)
        out[m] = abs(np.linalg.det(gram_matrix(g, Skeleton(pts[idx]))))
    return out


def infer_dimension(g: WorldFunction, samples, k_max: int, tol: float = 1e-8,
                    n_skeletons: int = 10, seed: int = 0, detail: dict | None = None):
    """Largest k with some |F_k| above threshold and every sampled F_{k+1} below it.

    Returns None when the sample shows no such stable k (for instance when
    F_k refuses to vanish at every order up to ``k_max + 1``).
    """
    pts = as_points(samples, g.dim)
    if len(pts) < k_max + 1:
        raise InsufficientSamples(f"need at least {k_max + 1} points, got {len(pts)}")
    if n_skeletons < 10:
        raise ContractViolation("use at least 10 skeletons per order")
    scale2 = sample_scale2(g, pts)
    top = min(k_max + 1, len(pts) - 1)
    nonzero = {}
    for k in range(1, top + 1):
        vals = gram_determinant_samples(g, pts, k, n_skeletons, seed + k)
        try:
            greedy = abs(np.linalg.det(gram_matrix(g, best_skeleton(g, pts, k))))
            vals = np.append(vals, greedy)
        except InsufficientSamples:
            pass
        thr = tol * scale2 ** k
        nonzero[k] = bool(np.any(vals > thr))
        if detail is not None:
            detail[k] = {"max_abs_F": float(vals.max()), "threshold": thr}
    for k in range(0, top):
        if k > 0 and not nonzero[k]:
            return None
        if not nonzero[k + 1]:
            if any(nonzero[j] for j in range(k + 2, top + 1)):
                return None
            return k if k <= k_max else None
    return None


def check_linear_structure(g: WorldFunction, samples, sk: Skeleton,
                           tol: float = 1e-9) -> ConditionResult:
    """Compare sigma with the quadratic form built on the skeleton metric.

    ``max_residual`` is absolute (sigma units); the pass band is
    ``tol * scale2`` with scale2 the typical squared length, at least 1.
    """
    _, ginv = metric_tensor(g, sk)
    pts = as_points(samples, g.dim)
    x = covariant_coordinates(g, sk, pts, check=False)
    rebuilt = quadratic_sigma(ginv, x[:, None, :], x[None, :, :])
    exact = _pair_sigma(g, pts)
    res = np.abs(exact - rebuilt)
    i, j = np.unravel_index(np.argmax(res), res.shape)
    bound = tol * max(1.0, sample_scale2(g, pts))
    worst = float(res[i, j])
    return ConditionResult("III", worst <= bound, worst,
                           [pts[i].tolist(), pts[j].tolist()],
                           {"bound": bound, "witness_sigma": float(exact[i, j]),
                            "witness_quadratic": float(rebuilt[i, j])})


def check_positivity(gmat, tol: float = 1e-10) -> ConditionResult:
    gmat = np.asarray(gmat, dtype=float)
    sym = 0.5 * (gmat + gmat.T)
    w, v = np.linalg.eigh(sym)
    norm = float(np.max(np.abs(w))) if w.size else 0.0
    thr = tol * norm
    zero_band = thr if thr > 0 else 0.0
    sig = {"positive": int(np.sum(w > zero_band)), "negative": int(np.sum(w < -zero_band)),
           "zero": int(np.sum(np.abs(w) <= zero_band))}
    passed = bool(norm > 0 and w[0] > thr)
    return ConditionResult("IV", passed, max(0.0, thr - float(w[0])),
                           [] if passed else v[:, 0].tolist(),
                           {"eigenvalues": w.tolist(), "signature": sig})


def _default_probe_box(g, sk):
    xs = covariant_coordinates(g, sk, sk.points, check=False)
    lo, hi = xs.min(axis=0), xs.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    return np.stack([lo - 0.5 * span, hi + 0.5 * span], axis=-1)


def check_continuity(g: WorldFunction, sk: Skeleton, probe_box=None, grid: int = 3,
                     tol: float = 1e-9, starts: int = 5, seed: int = 0,
                     carrier: Callable | None = None) -> ConditionResult:
    """Every coordinate tuple in the probe box must name exactly one point.

    For each target y the system (P0Pi.P0P) = y_i is solved from several
    starts. ``carrier`` optionally restricts which chart points exist; a
    solution outside it does not count.
    """
    metric_tensor(g, sk)
    if sk.n != g.dim:
        raise ContractViolation("continuity needs a skeleton with one vector per chart label")
    box = _default_probe_box(g, sk) if probe_box is None else np.asarray(probe_box, float)
    if box.shape != (sk.n, 2):
        raise ContractViolation(f"probe box must have shape ({sk.n}, 2)")
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    targets = np.array(list(itertools.product(*axes)))

    pts = sk.points
    c_lo, c_hi = pts.min(axis=0), pts.max(axis=0)
    pad = np.maximum(c_hi - c_lo, 1.0)
    rng = np.random.default_rng(seed)
    x0s = [sk.origin] + [rng.uniform(c_lo - pad, c_hi + pad) for _ in range(starts - 1)]
    chart_diag = float(np.linalg.norm(2 * pad + c_hi - c_lo))
    distinct = 1e-6 * chart_diag
    yscale = max(1.0, float(np.max(np.abs(box))))

    worst = 0.0
    witness = []
    missing = multiple = 0
    for y in targets:
        sols = []
        best = math.inf
        for x0 in x0s:
            fun = lambda p, y=y: covariant_coordinates(g, sk, p, check=False) - y
            sol = optimize.root(fun, x0, method="hybr", options={"xtol": 1e-13})
            r = float(np.max(np.abs(fun(sol.x))))
            best = min(best, r)
            if r <= tol * yscale and (carrier is None or carrier(sol.x)):
                sols.append(sol.x)
        worst = max(worst, best)
        if not sols:
            missing += 1
            witness = witness or [y.tolist()]
            continue
        far = max(float(np.linalg.norm(s - sols[0])) for s in sols)
        if far > distinct:
            multiple += 1
            witness = witness or [y.tolist()]
    passed = missing == 0 and multiple == 0
    return ConditionResult("V", passed, worst, witness,
                           {"targets": len(targets), "missing": missing,
                            "multiple": multiple, "probe_box": box.tolist(), "starts": starts})


@dataclass
class VerificationReport:
    n: int
    conditions: dict
    inferred_dimension: int | None
    overall: bool
    skeleton: Skeleton | None = None

    def failed(self) -> list:
        return [k for k in CONDITIONS if not self.conditions[k].passed]

    def to_dict(self) -> dict:
        out = {f"condition_{k}": self.conditions[k].to_dict() for k in CONDITIONS}
        out["inferred_dimension"] = self.inferred_dimension
        out["overall"] = bool(self.overall)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def verify_euclidean(g: WorldFunction, n: int, samples=None, n_samples: int = 200,
                     box=(-10.0, 10.0), seed: int = 0, tol: float = 1e-9,
                     continuity_grid: int = 3, carrier: Callable | None = None
                     ) -> VerificationReport:
    """Run conditions I-V against ``g`` for dimension ``n``."""
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = rng.uniform(box[0], box[1], size=(n_samples, g.dim))
    pts = as_points(samples, g.dim)
    conds = {"I": check_symmetry(g, pts)}
    ddetail: dict = {}
    inferred = infer_dimension(g, pts, k_max=n + 1, seed=seed, detail=ddetail)
    conds["II"] = ConditionResult("II", inferred == n, 0.0 if inferred == n else math.inf,
                                  [], {"orders": ddetail})
    sk = None
    try:
        sk = best_skeleton(g, pts, n)
        gmat, _ = metric_tensor(g, sk)
        conds["III"] = check_linear_structure(g, pts, sk, tol)
        conds["IV"] = check_positivity(gmat)
        conds["V"] = check_continuity(g, sk, grid=continuity_grid, seed=seed, carrier=carrier)
    except (SingularSkeleton, InsufficientSamples, ContractViolation) as exc:
        for k in ("III", "IV", "V"):
            conds.setdefault(k, ConditionResult(k, False, math.inf, [], {"error": str(exc)}))
    overall = all(c.passed for c in conds.values())
    return VerificationReport(n, conds, inferred, overall, sk)
