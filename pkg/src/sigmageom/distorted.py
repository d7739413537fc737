"""Quantitative study of the distorted space-time geometry.

Covers the mass shift of a timelike link, the radius profile of a segment
(closed form against a numeric envelope), and seeded Monte Carlo chains of
equal links where each link is parallel to its predecessor in the distorted
geometry.

Chains are solved joint by joint in the rest frame of the incoming link. The
distorted world function depends on the Minkowski one only, so it is Lorentz
invariant and the local solve is exact. Lab coordinates are obtained by
composing boosts; over long chains the accumulated rapidity grows roughly
linearly, so lab coordinates lose precision. All per-joint diagnostics are
therefore computed from the local triples.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import WorldFunction, as_points
from .envelopes import EnvelopeObject, envelope_value, sample_envelope
from .errors import (
    BelowThreshold, BranchDomainError, ContractViolation, EmptyEnvelope, SolverFailure,
)

_XTOL = 1e-15
_MAXITER = 200


def mass_shift(mu_m: float, d: float, sigma0: float) -> float:
    """Distorted link length from the Minkowski one, valid above threshold."""
    if not mu_m * mu_m > 2.0 * sigma0:
        raise BelowThreshold(f"mu_M^2 = {mu_m * mu_m!r} must exceed 2 sigma0 = {2 * sigma0!r}")
    return math.sqrt(mu_m * mu_m + 2.0 * d)


def mass_unshift(mu_d: float, d: float, sigma0: float) -> float:
    mu2 = mu_d * mu_d - 2.0 * d
    if not mu2 > 2.0 * sigma0:
        raise BelowThreshold(f"mu_d = {mu_d!r} lies below threshold for d={d}, sigma0={sigma0}")
    return math.sqrt(mu2)


# ---------------------------------------------------------------- segment radius

def _check_branches(d, sigma0, mu_d):
    if not mu_d * mu_d > 2.0 * d:
        raise BranchDomainError("mu_d^2 must exceed 2d")
    if not mu_d * mu_d > 8.0 * (sigma0 + d):
        raise BranchDomainError(
            f"three branches need mu_d^2 > 8(sigma0 + d) = {8 * (sigma0 + d)!r}")


def segment_radius_closed_sq(d: float, sigma0: float, mu_d: float, tau):
    """Squared spatial radius of the segment at parameter tau (three branches).

    tau is the distorted length from the first end divided by mu_d. The outer
    branches may go negative for some parameters; the value is returned as is.
    """
    _check_branches(d, sigma0, mu_d)
    tau = np.asarray(tau, dtype=float)
    if np.any((tau < 0) | (tau > 1)):
        raise ContractViolation("tau must lie in [0, 1]")
    mu2 = mu_d * mu_d
    k = 1.0 - 2.0 * d / mu2
    s = sigma0 + d
    edge = math.sqrt(2.0 * s) / mu_d

    def outer(u):
        return u * u * mu2 * ((1.0 - u * d / (2.0 * s)) ** 2 / k - sigma0 / s)

    middle = 1.5 * d + 2.0 * d * (tau - 0.5) ** 2 / k
    out = np.where(tau < edge, outer(tau), np.where(tau > 1.0 - edge, outer(1.0 - tau), middle))
    return out if out.ndim else float(out)


def segment_radius_closed(d: float, sigma0: float, mu_d: float, tau):
    """Radius from the closed form; NaN where the squared radius is negative."""
    r2 = np.asarray(segment_radius_closed_sq(d, sigma0, mu_d, tau))
    with np.errstate(invalid="ignore"):
        out = np.where(r2 >= 0, np.sqrt(np.abs(r2)), np.nan)
    return out if out.ndim else float(out)


def canonical_segment(g: WorldFunction, mu_d: float):
    """End points at rest: P0 at the origin, P1 on the time axis at length mu_d."""
    _require_spacetime(g)
    big_t = mass_unshift(mu_d, g.d, _threshold(g)) / g.c
    p0 = np.zeros(g.dim)
    p1 = p0.copy()
    p1[0] = big_t
    return p0, p1


def _threshold(g) -> float:
    return g.sigma0 if g.kind == "distorted" else 0.0


def _require_spacetime(g):
    if not g.is_spacetime:
        raise ContractViolation("distorted-geometry routines need a space-time world function")


def segment_radius_numeric(g: WorldFunction, mu_d: float, tau: float,
                           direction=None, tol: float = 1e-12) -> float:
    """Spatial radius of the sampled segment where its length fraction is tau.

    For each time t the segment residual is solved along a spatial ray from
    the axis out to the light cone; t itself is then tuned until the point's
    distorted distance from P0 is tau * mu_d.
    """
    if not 0.0 < tau < 1.0:
        raise ContractViolation("tau must be interior to (0, 1)")
    p0, p1 = canonical_segment(g, mu_d)
    seg = EnvelopeObject.segment(p0, p1)
    big_t = p1[0]
    u = np.zeros(g.dim)
    if direction is None:
        u[1] = 1.0
    else:
        u[1:] = np.asarray(direction, float)
        u[1:] /= np.linalg.norm(u[1:])

    def point(t, r):
        q = u * r
        q[0] = t
        return q

    def f(t, r):
        return float(_seg_value(g, seg, point(t, r)))

    def radius(t):
        if f(t, 0.0) >= -tol:
            return 0.0
        r_max = g.c * min(t, big_t - t)
        if f(t, r_max) <= 0:
            raise SolverFailure(f"segment residual has no sign change at t={t!r}")
        return optimize.brentq(lambda r: f(t, r), 0.0, r_max, xtol=_XTOL, maxiter=_MAXITER)

    def frac(t):
        return math.sqrt(2.0 * g(p0, point(t, radius(t)))) / mu_d - tau

    eps = 1e-9 * big_t
    lo, hi = eps, big_t - eps
    if frac(lo) > 0 or frac(hi) < 0:
        raise SolverFailure(f"length fraction {tau} not reachable")
    t = optimize.brentq(frac, lo, hi, xtol=_XTOL * big_t, maxiter=_MAXITER)
    return radius(t)


def _seg_value(g, seg, r):
    return envelope_value(g, seg, r, strict=False)


@dataclass
class SegmentProfile:
    tau_grid: np.ndarray
    r_closed: np.ndarray
    r_numeric: np.ndarray
    r_sampled: np.ndarray
    params: dict

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "r_closed", "r_numeric", "r_sampled"])
            for row in zip(self.tau_grid, self.r_closed, self.r_numeric, self.r_sampled):
                w.writerow([format(float(v), ".17g") for v in row])


def sampled_segment_radius(g: WorldFunction, mu_d: float, taus, grid: int = 128):
    """Radius read off a grid-sampled segment cloud in the (t, x) plane.

    Each cloud point gets its own length fraction; the radius at tau is the
    largest |x| among points whose fraction lies within one grid step.
    """
    p0, p1 = canonical_segment(g, mu_d)
    seg = EnvelopeObject.segment(p0, p1)
    big_t = p1[0]
    reach = 3.0 * math.sqrt(g.d) + 0.1 * mu_d
    box = np.zeros((g.dim, 2))
    box[0] = (-0.1 * big_t, 1.1 * big_t)
    box[1] = (-reach, reach)
    try:
        cloud = sample_envelope(g, seg, box, grid)
    except EmptyEnvelope:
        return np.zeros(len(np.atleast_1d(taus)))
    pts = cloud.points
    fr = np.sqrt(2.0 * np.maximum(np.asarray(g(p0, pts)), 0.0)) / mu_d
    rad = np.linalg.norm(pts[:, 1:], axis=1)
    half = 1.0 / grid
    out = []
    for tau in np.atleast_1d(taus):
        sel = np.abs(fr - tau) <= half
        out.append(float(rad[sel].max()) if np.any(sel) else math.nan)
    return np.array(out)


def segment_profile(g: WorldFunction, mu_d: float, taus=None, grid: int = 128,
                    sampled: bool = True) -> SegmentProfile:
    if taus is None:
        taus = np.linspace(0.05, 0.95, 19)
    taus = np.asarray(taus, dtype=float)
    if g.kind == "distorted":
        closed = np.asarray(segment_radius_closed(g.d, g.sigma0, mu_d, taus), dtype=float)
    else:
        closed = np.zeros(len(taus))
    numeric = np.array([segment_radius_numeric(g, mu_d, t) for t in taus])
    samp = (sampled_segment_radius(g, mu_d, taus, grid) if sampled
            else np.full(len(taus), math.nan))
    return SegmentProfile(taus, np.atleast_1d(closed), numeric, samp,
                          {"d": g.d, "sigma0": g.sigma0, "mu_d": mu_d, "c": g.c, "grid": grid})


# ---------------------------------------------------------------- chains

def _scalar_distortion(g: WorldFunction):
    if g.kind == "minkowski":
        return lambda s: s
    if g.distortion is not None:
        return lambda s: float(g.distortion(s))
    d, s0 = g.d, g.sigma0
    k = 1.0 + d / s0

    def dmap(s):
        if s > s0:
            return s + d
        return k * s if s >= 0.0 else s
    return dmap


def _boost(u: np.ndarray) -> np.ndarray:
    """Symmetric boost taking (1, 0, ..., 0) to the unit timelike vector u."""
    u0, uv = u[0], u[1:]
    n = len(u)
    b = np.empty((n, n))
    b[0, 0] = u0
    b[0, 1:] = uv
    b[1:, 0] = uv
    b[1:, 1:] = np.eye(n - 1) + np.outer(uv, uv) / (1.0 + u0)
    return b


@dataclass
class JointSolution:
    alpha: float
    beta: float


def solve_joint(g: WorldFunction, mu_in: float, mu_d: float, tol: float = 1e-12) -> JointSolution:
    """Next link (alpha, beta) in the rest frame of an incoming link.

    The incoming link runs from (-mu_in, 0) to the origin in length units.
    The next end point is (alpha, beta * s) for any unit spatial s: its
    distorted length is mu_d and its distorted scalar product with the
    incoming link equals the product of the two lengths.
    """
    dmap = _scalar_distortion(g)
    mu2 = mu_d * mu_d
    s0 = _threshold(g)
    len_in = math.sqrt(2.0 * dmap(0.5 * mu_in * mu_in))

    def alpha_of(beta):
        b2 = beta * beta
        base = mu_in * mu_in + b2
        # stay within sigma0/2 of the link value so lower branches are never read
        width = s0 if s0 > 0 else 1e-6 * base
        lo = math.sqrt(max(base - width, 0.0))
        hi = math.sqrt(base + width)
        fun = lambda a: 2.0 * dmap(0.5 * (a * a - b2)) - mu2
        flo, fhi = fun(lo), fun(hi)
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if flo * fhi > 0:
            raise SolverFailure(f"link length not bracketed at beta={beta!r}")
        return optimize.brentq(fun, lo, hi, xtol=_XTOL, maxiter=_MAXITER)

    def h(beta):
        a = alpha_of(beta)
        b2 = beta * beta
        far = dmap(0.5 * ((mu_in + a) ** 2 - b2))
        near = dmap(0.5 * (a * a - b2))
        prod = far - dmap(0.5 * mu_in * mu_in) - near
        return prod - len_in * math.sqrt(2.0 * near)

    h0 = h(0.0)
    if h0 >= -tol * mu2:
        return JointSolution(alpha_of(0.0), 0.0)
    hi = max(math.sqrt(6.0 * g.d), 1e-3 * mu_d)
    for _ in range(60):
        if h(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SolverFailure("parallelism residual not bracketed")
    beta = optimize.brentq(h, 0.0, hi, xtol=_XTOL, maxiter=_MAXITER)
    return JointSolution(alpha_of(beta), beta)


def cone_directions(n_space: int, count: int) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors in n_space dimensions."""
    if n_space == 1:
        return np.array([[1.0], [-1.0]])
    if n_space == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if n_space == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        rr = np.sqrt(1 - z * z)
        return np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=-1)
    v = np.random.default_rng(0).normal(size=(count, n_space))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def next_link_solutions(g: WorldFunction, p_prev, p_cur, mu_d: float, count: int = 16,
                        tol: float = 1e-12):
    """End points of every admissible next link, one per sampled direction.

    Returns an array of chart points lying on the cone around the incoming
    link. Directions where the solve fails are skipped and counted.
    """
    _require_spacetime(g)
    p_prev = as_points(p_prev, g.dim)
    p_cur = as_points(p_cur, g.dim)
    c = g.c
    v = (p_cur - p_prev).copy()
    v[0] *= c
    sm = g.minkowski_sigma(p_prev, p_cur)
    if not sm > 0 or v[0] <= 0:
        raise ContractViolation("incoming link must be future timelike")
    mu_in = math.sqrt(2.0 * sm)
    lam = _boost(v / mu_in)
    out = []
    failed = 0
    for s in cone_directions(g.dim - 1, count):
        try:
            sol = solve_joint(g, mu_in, mu_d, tol)
        except SolverFailure:
            failed += 1
            continue
        w = np.concatenate([[sol.alpha], sol.beta * s])
        step = lam @ w
        step[0] /= c
        out.append(p_cur + step)
    return np.array(out).reshape(-1, g.dim), failed


@dataclass
class BrokenTube:
    chain: np.ndarray
    mu_d: float
    local: np.ndarray           # (joints, 3, dim) triples in length units
    kicks: np.ndarray           # (joints, dim - 1) transverse step beta * s
    residual_parallel: np.ndarray
    residual_length: np.ndarray
    theta_dM: np.ndarray
    seed: int | None
    params: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def n_links(self) -> int:
        return len(self.chain) - 1

    def to_csv(self, path) -> None:
        """One row per link: its end point, joint angle and residuals."""
        dim = self.chain.shape[1]
        names = ["t", "x", "y", "z"] if dim == 4 else ["t"] + [f"x{i}" for i in range(1, dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["link_index"] + names + ["theta_dM", "residual_parallel", "residual_length"])
            for k in range(self.n_links):
                th = self.theta_dM[k - 1] if k else math.nan
                rp = self.residual_parallel[k - 1] if k else math.nan
                row = [str(k)] + [format(float(x), ".17g") for x in self.chain[k + 1]]
                row += [format(float(x), ".17g") for x in (th, rp, self.residual_length[k])]
                w.writerow(row)


def _minkowski_length_units(p, q):
    delta = p - q
    return 0.5 * (delta[..., 0] ** 2 - np.sum(delta[..., 1:] ** 2, axis=-1))


def _local_geometry(g: WorldFunction) -> WorldFunction:
    """Same distortion on a chart whose time label is already a length."""
    if g.kind == "minkowski":
        return WorldFunction.minkowski(1.0, g.dim)
    return WorldFunction.distorted(g.d, g.sigma0, 1.0, g.dim, g.distortion)


def simulate_worldline(g: WorldFunction, seed: int, n_links: int, mu_d: float,
                       initial_link=None, tol: float = 1e-12) -> BrokenTube:
    """Seeded chain of equal links, each parallel to the previous one.

    The first link is ``initial_link`` (two chart points) or a link at rest
    from the origin. Each new link picks a uniform random direction on its
    solution cone. A solver failure re-raises with ``exc.partial`` holding
    the chain built so far.
    """
    _require_spacetime(g)
    if n_links < 1:
        raise ContractViolation("need at least one link")
    c = g.c
    mu2 = mu_d * mu_d
    if initial_link is None:
        p0 = np.zeros(g.dim)
        p1 = p0.copy()
        p1[0] = mass_unshift(mu_d, g.d, _threshold(g)) / c
    else:
        p0, p1 = as_points(initial_link, g.dim)
    if abs(2.0 * g(p0, p1) - mu2) > 1e-9 * mu2:
        raise ContractViolation("initial link does not have length mu_d")
    v = (p1 - p0).copy()
    v[0] *= c
    mu_in = math.sqrt(v[0] ** 2 - float(v[1:] @ v[1:]))
    if v[0] <= 0:
        raise ContractViolation("initial link must be future timelike")
    lam = _boost(v / mu_in)
    rng = np.random.default_rng(seed)
    chain = [p0, p1]
    triples, kicks = [], []
    error = None
    for _ in range(n_links - 1):
        try:
            sol = solve_joint(g, mu_in, mu_d, tol)
        except SolverFailure as exc:
            error = str(exc)
            break
        s = rng.normal(size=g.dim - 1)
        s /= np.linalg.norm(s)
        w = np.concatenate([[sol.alpha], sol.beta * s])
        prev = np.zeros(g.dim)
        prev[0] = -mu_in
        triples.append(np.stack([prev, np.zeros(g.dim), w]))
        kicks.append(sol.beta * s)
        mu_w = math.sqrt(sol.alpha * sol.alpha - sol.beta * sol.beta)
        step = lam @ w
        step[0] /= c
        chain.append(chain[-1] + step)
        lam = lam @ _boost(w / mu_w)
        mu_in = mu_w

    local = np.array(triples).reshape(-1, 3, g.dim)
    gl = _local_geometry(g)
    link0 = 2.0 * g(p0, p1) - mu2
    if len(local):
        a, b, e = local[:, 0], local[:, 1], local[:, 2]
        s_ab, s_be, s_ae = gl(a, b), gl(b, e), gl(a, e)
        rlen = np.concatenate([[link0], 2.0 * np.atleast_1d(s_be) - mu2])
        prod = s_ae - s_ab - s_be
        rpar = np.atleast_1d(prod - np.sqrt(2.0 * s_ab) * np.sqrt(2.0 * s_be))
        theta = _theta_from_triples(local)
    else:
        rlen = np.array([link0])
        rpar = theta = np.zeros(0)
    tube = BrokenTube(np.array(chain), mu_d, local, np.array(kicks).reshape(-1, g.dim - 1),
                      rpar, rlen, theta, seed,
                      {"d": g.d, "sigma0": g.sigma0, "c": c, "dim": g.dim,
                       "final_rapidity": float(math.acosh(max(1.0, lam[0, 0])))},
                      error)
    if error is not None:
        exc = SolverFailure(error)
        exc.partial = tube
        raise exc
    return tube


def _cosh_from_triples(local: np.ndarray) -> np.ndarray:
    a, b, e = local[:, 0], local[:, 1], local[:, 2]
    s_ab = _minkowski_length_units(a, b)
    s_be = _minkowski_length_units(b, e)
    s_ae = _minkowski_length_units(a, e)
    prod = s_ae - s_ab - s_be
    return prod / (np.sqrt(2.0 * s_ab) * np.sqrt(2.0 * s_be))


def _theta(cosh):
    # arccosh halves the digits near 1; a few ulp above 1 is a straight joint
    cosh = np.asarray(cosh, dtype=float)
    return np.where(cosh - 1.0 <= 8 * np.finfo(float).eps, 0.0,
                    np.arccosh(np.maximum(cosh, 1.0)))


def _theta_from_triples(local):
    return _theta(_cosh_from_triples(local))


def predicted_cosh(mu_d: float, d: float) -> float:
    """Closed-form joint value (mu_d^2 - d) / (mu_d^2 - 2d)."""
    return (mu_d * mu_d - d) / (mu_d * mu_d - 2.0 * d)


def consistent_cosh(mu_d: float, d: float) -> float:
    """Joint value implied by the distorted scalar product of adjacent links.

    With all three pair values above threshold the adjacent product shifts
    by -d relative to Minkowski, giving (mu_d^2 + d) / (mu_d^2 - 2d).
    """
    return (mu_d * mu_d + d) / (mu_d * mu_d - 2.0 * d)


@dataclass
class WobbleStats:
    n_links: int
    seed: int | None
    mean_cosh: float
    predicted_cosh: float
    consistent_cosh: float
    max_cosh_deviation: float
    theta_rms: float
    theta_mean: float
    predicted_theta: float
    kick_rms: float
    displacement: float
    expected_displacement: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        def fix(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        return json.dumps({k: fix(v) for k, v in self.to_dict().items()}, indent=2, sort_keys=True)


def wobble_statistics(tube: BrokenTube, d: float | None = None,
                      sigma0: float | None = None) -> WobbleStats:
    """Joint angles measured with the Minkowski world function on the chain.

    ``displacement`` is the length of the summed transverse kicks, each taken
    in the rest frame of its incoming link; for independent isotropic kicks
    it grows like ``kick_rms * sqrt(joints)``.
    """
    if tube.n_links < 2:
        raise ContractViolation("statistics need at least two links")
    d = tube.params.get("d", 0.0) if d is None else d
    mu = tube.mu_d
    cosh = _cosh_from_triples(tube.local)
    theta = _theta(cosh)
    pred = predicted_cosh(mu, d)
    kick = np.linalg.norm(tube.kicks, axis=1)
    kick_rms = float(np.sqrt(np.mean(kick ** 2)))
    return WobbleStats(
        n_links=tube.n_links,
        seed=tube.seed,
        mean_cosh=float(np.mean(cosh)),
        predicted_cosh=pred,
        consistent_cosh=consistent_cosh(mu, d),
        max_cosh_deviation=float(np.max(np.abs(cosh - pred))),
        theta_rms=float(np.sqrt(np.mean(theta ** 2))),
        theta_mean=float(np.mean(theta)),
        predicted_theta=math.sqrt(2.0 * d) / mu,
        kick_rms=kick_rms,
        displacement=float(np.linalg.norm(tube.kicks.sum(axis=0))),
        expected_displacement=kick_rms * math.sqrt(len(kick)),
    )
