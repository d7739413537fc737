"""Elementary geometric objects as zero sets of envelope functions.

An object is fixed by a handful of defining points; membership of a point R
is decided by the sign of a residual built from sigma alone. The sampler
realizes a zero set numerically on a chart grid: sign changes along grid
edges are bracketed and refined, and zero sets where the residual only
touches zero (straight lines in flat geometries) are found by local
minimization of the residual magnitude.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import Skeleton, WorldFunction, as_points, covariant_coordinates
from .errors import ContractViolation, EmptyEnvelope, ImaginaryLength, SingularSkeleton

OBJECT_KINDS = ("sphere", "ellipsoid", "segment", "tube", "coordinate_tube", "broken_tube")

# residual is (length)**power
_POWER = {"sphere": 1, "ellipsoid": 1, "segment": 1, "broken_tube": 1,
          "tube": 4, "coordinate_tube": 4}


@dataclass(frozen=True)
class EnvelopeObject:
    kind: str
    points: np.ndarray
    a: float | None = None

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ContractViolation(f"unknown object kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def power(self) -> int:
        return _POWER[self.kind]

    @classmethod
    def sphere(cls, center, through):
        """All R as far from ``center`` as ``through`` is."""
        return cls("sphere", _distinct([center, through]))

    @classmethod
    def ellipsoid(cls, p, q, a: float):
        if not a > 0:
            raise ContractViolation("semiaxis must be positive")
        return cls("ellipsoid", as_points([p, q]), float(a))

    @classmethod
    def segment(cls, p0, p1):
        return cls("segment", _distinct([p0, p1]))

    @classmethod
    def tube(cls, p0, q):
        return cls("tube", _distinct([p0, q]))

    @classmethod
    def coordinate_tube(cls, q, skeleton: Skeleton):
        """Line through P0 and Q written with a coordinate skeleton."""
        pts = np.vstack([as_points(q)[None, :], skeleton.points])
        if np.array_equal(pts[0], pts[1]):
            raise ContractViolation("Q must differ from the skeleton origin")
        return cls("coordinate_tube", pts)

    @classmethod
    def broken_tube(cls, points):
        pts = as_points(points)
        if pts.ndim != 2 or len(pts) < 2:
            raise ContractViolation("a broken line needs at least two points")
        return cls("broken_tube", pts)

    def characteristic_length(self, g: WorldFunction) -> float:
        pts = self.points
        s = np.abs(np.asarray(g(pts[:, None, :], pts[None, :, :])))
        ell = math.sqrt(2.0 * float(s.max()))
        if self.a is not None:
            ell = max(ell, 2.0 * self.a)
        return ell if ell > 0 else 1.0


def _distinct(pts):
    arr = as_points(pts)
    if np.array_equal(arr[0], arr[1]):
        raise ContractViolation("defining points must be distinct")
    return arr


def _length(sig, strict: bool):
    sig = np.asarray(sig, dtype=float)
    if strict:
        if np.any(sig < 0):
            raise ImaginaryLength("a required length sqrt(2 sigma) is imaginary")
        return np.sqrt(2.0 * sig)
    with np.errstate(invalid="ignore"):
        return np.where(sig >= 0, np.sqrt(2.0 * np.abs(sig)), np.nan)


def _segment_value(g, p0, p1, r, strict):
    return (_length(g(p0, p1), strict) - _length(g(p0, r), strict)
            - _length(g(r, p1), strict))


def envelope_value(g: WorldFunction, obj: EnvelopeObject, r, strict: bool = True):
    """Residual whose zero set is ``obj``; vectorized over leading axes of r.

    The ellipsoid residual is negative inside and positive outside. With
    ``strict=False`` undefined lengths give NaN instead of raising.
    """
    r = as_points(r, g.dim)
    if obj.dim != g.dim:
        raise ContractViolation("object and geometry dimensions differ")
    pts = obj.points
    kind = obj.kind
    if kind == "sphere":
        out = _length(g(pts[0], pts[1]), strict) - _length(g(pts[0], r), strict)
    elif kind == "ellipsoid":
        out = _length(g(pts[0], r), strict) + _length(g(r, pts[1]), strict) - 2.0 * obj.a
    elif kind == "segment":
        out = _segment_value(g, pts[0], pts[1], r, strict)
    elif kind == "broken_tube":
        vals = np.stack([_segment_value(g, pts[i], pts[i + 1], r, strict)
                         for i in range(len(pts) - 1)])
        with np.errstate(invalid="ignore"):
            pick = np.nanargmin(np.where(np.isnan(vals), np.inf, np.abs(vals)), axis=0)
        out = np.take_along_axis(vals, np.expand_dims(pick, 0), 0)[0]
        out = np.where(np.all(np.isnan(vals), axis=0), np.nan, out)
    elif kind == "tube":
        p0, q = pts
        vw = g(p0, r) + g(q, p0) - g(p0, p0) - g(q, r)
        out = vw * vw - (2.0 * g(p0, q)) * (2.0 * g(p0, r))
    else:
        q = pts[0]
        sk = Skeleton(pts[1:])
        xq = covariant_coordinates(g, sk, q, check=False)
        xr = covariant_coordinates(g, sk, r, check=False)
        if sk.n < 2:
            out = np.zeros(np.shape(r)[:-1])
        else:
            cross = xq[1:] * xr[..., :1] - xq[0] * xr[..., 1:]
            out = np.max(np.abs(cross), axis=-1)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def contains(g: WorldFunction, obj: EnvelopeObject, r, tol: float | None = None) -> bool:
    if tol is None:
        tol = default_tol(g, obj)
    return bool(abs(envelope_value(g, obj, r)) <= tol)


def default_tol(g: WorldFunction, obj: EnvelopeObject, rel: float = 1e-6) -> float:
    return rel * obj.characteristic_length(g) ** obj.power


def default_box(g: WorldFunction, obj: EnvelopeObject) -> np.ndarray:
    """Bounding box of the defining points, widened by 3 sqrt(d) and 10%."""
    pts = obj.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    ell = obj.characteristic_length(g)
    pad = 3.0 * math.sqrt(g.d) + 0.1 * np.maximum(hi - lo, ell)
    return np.stack([lo - pad, hi + pad], axis=-1)


@dataclass
class SampledEnvelope:
    points: np.ndarray
    residuals: np.ndarray
    box: np.ndarray
    grid: tuple
    tol: float
    kind: str = ""
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def to_csv(self, path) -> None:
        """Write ``x0,...,x{n-1},residual`` rows with round-trip precision."""
        n = self.box.shape[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i}" for i in range(n)] + ["residual"])
            for p, r in zip(self.points, self.residuals):
                w.writerow([format(float(v), ".17g") for v in p] + [format(float(r), ".17g")])


def _normalize_box(box, dim):
    b = np.asarray(box, dtype=float)
    if b.shape != (dim, 2):
        raise ContractViolation(f"box must have shape ({dim}, 2)")
    if np.any(b[:, 1] < b[:, 0]) or not np.all(np.isfinite(b)):
        raise ContractViolation("box bounds must be finite with lo <= hi")
    return b


def sample_envelope(g: WorldFunction, obj: EnvelopeObject, box=None, grid=64,
                    tol: float | None = None) -> SampledEnvelope:
    """Numerically sample the zero set of ``obj`` inside a chart box.

    Axes whose box interval is a single value are held fixed, which turns the
    scan into a slice. Raises EmptyEnvelope when nothing is found.
    """
    box = default_box(g, obj) if box is None else _normalize_box(box, g.dim)
    if tol is None:
        tol = default_tol(g, obj)
    active = [k for k in range(g.dim) if box[k, 1] > box[k, 0]]
    if np.isscalar(grid):
        grid = [int(grid)] * g.dim
    counts = tuple(int(grid[k]) if k in active else 1 for k in range(g.dim))
    if any(counts[k] < 8 for k in active):
        raise ContractViolation("grid must have at least 8 nodes per active axis")
    axes = [np.linspace(box[k, 0], box[k, 1], counts[k]) if k in active
            else np.array([box[k, 0]]) for k in range(g.dim)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    f = np.asarray(envelope_value(g, obj, nodes, strict=False))
    h = np.array([(box[k, 1] - box[k, 0]) / (counts[k] - 1) if k in active else 0.0
                  for k in range(g.dim)])
    diag = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    fscalar = lambda x: float(envelope_value(g, obj, x, strict=False))

    found = []
    n_bracketed = n_touch = 0
    near = np.isfinite(f) & (np.abs(f) <= tol)
    for idx in np.argwhere(near):
        found.append((tuple(idx), 0, nodes[tuple(idx)].copy()))

    for k in active:
        lo_sl = [slice(None)] * g.dim
        hi_sl = [slice(None)] * g.dim
        lo_sl[k] = slice(0, -1)
        hi_sl[k] = slice(1, None)
        fa, fb = f[tuple(lo_sl)], f[tuple(hi_sl)]
        mask = np.isfinite(fa) & np.isfinite(fb) & (fa * fb < 0)
        for idx in np.argwhere(mask):
            x0 = nodes[tuple(idx)]
            e = np.zeros(g.dim)
            e[k] = h[k]
            t = optimize.brentq(lambda s: fscalar(x0 + s * e), 0.0, 1.0,
                                xtol=1e-15, rtol=4 * np.finfo(float).eps)
            found.append((tuple(idx), 1 + k, x0 + t * e))
            n_bracketed += 1

    # touching zeros: grid-local minima of |f| where a zero may hide in the cell
    absf = np.where(np.isfinite(f), np.abs(f), np.inf)
    is_min = np.isfinite(absf) & ~near
    spread = np.zeros_like(absf)
    for k in active:
        for shift in (1, -1):
            nb = np.roll(absf, shift, axis=k)
            edge = [slice(None)] * g.dim
            edge[k] = 0 if shift == 1 else -1
            nb[tuple(edge)] = np.inf
            is_min &= absf <= nb
            fn = np.roll(f, shift, axis=k)
            diff = np.where(np.isfinite(nb), np.abs(fn - f), 0.0)
            spread = np.maximum(spread, diff)
    is_min &= absf <= 4.0 * spread
    act = np.array(active)
    simplex_step = np.diag(h[act])
    for idx in np.argwhere(is_min):
        x0 = nodes[tuple(idx)].copy()

        def obj_fn(y, x0=x0):
            x = x0.copy()
            x[act] = y
            v = fscalar(x)
            return abs(v) if math.isfinite(v) else math.inf

        start = x0[act]
        res = optimize.minimize(
            obj_fn, start, method="Nelder-Mead",
            options={"xatol": 1e-13 * diag, "fatol": 1e-6 * tol, "maxiter": 400 * len(act),
                     "initial_simplex": np.vstack([start, start + simplex_step])})
        if res.fun <= tol and np.all(np.abs(res.x - start) <= 2.0 * h[act] + 1e-300):
            x = x0.copy()
            x[act] = res.x
            found.append((tuple(idx), -1, x))
            n_touch += 1

    found.sort(key=lambda item: (item[0], item[1]))
    pts = np.array([p for _, _, p in found]).reshape(-1, g.dim)
    if len(pts):
        pts = np.unique(pts, axis=0) if len(pts) > 1 else pts
        res = np.asarray(envelope_value(g, obj, pts, strict=False)).reshape(-1)
        slack = 1e-12 * max(diag, 1.0)
        inside = np.all((pts >= box[:, 0] - slack) & (pts <= box[:, 1] + slack), axis=1)
        keep = np.isfinite(res) & (np.abs(res) <= tol) & inside
        pts, res = pts[keep], res[keep]
    else:
        res = np.zeros(0)
    if not len(pts):
        raise EmptyEnvelope(f"no {obj.kind} points found in box {box.tolist()}")
    return SampledEnvelope(pts, res, box, counts, tol, obj.kind,
                           {"bracketed": n_bracketed, "touching": n_touch})


def principal_spreads(points) -> np.ndarray:
    """Singular values of the centred cloud divided by sqrt(N)."""
    pts = np.asarray(points, dtype=float)
    centred = pts - pts.mean(axis=0)
    return np.linalg.svd(centred, compute_uv=False) / math.sqrt(len(pts))


def transverse_extent(points, p0, q) -> float:
    """Largest chart distance of the cloud from the chart line through p0, q."""
    pts = np.asarray(points, dtype=float)
    u = np.asarray(q, float) - np.asarray(p0, float)
    u = u / np.linalg.norm(u)
    rel = pts - p0
    perp = rel - np.outer(rel @ u, u)
    return float(np.max(np.linalg.norm(perp, axis=-1)))


@dataclass
class CoincidenceReport:
    coincide: bool
    tube_residual_on_coordinate_tube: float
    coordinate_residual_on_tube: float
    tol: float
    tube: SampledEnvelope | None
    coordinate_tube: SampledEnvelope | None
    tube_transverse_extent: float
    coordinate_transverse_extent: float


def tube_coincidence_check(g: WorldFunction, q, sk: Skeleton, box=None, grid=48,
                           tol: float | None = None,
                           sample_tol: float | None = None) -> CoincidenceReport:
    """Compare the straight P0Q with its coordinate-skeleton version.

    Each cloud is scored with the other object's residual; the two one-sided
    maxima must both stay within ``tol`` for the objects to coincide. An
    empty cloud counts as not coinciding.
    """
    q = as_points(q, g.dim)
    if np.array_equal(q, sk.origin):
        raise ContractViolation("Q must differ from P0")
    from .core import metric_tensor
    metric_tensor(g, sk)
    tube = EnvelopeObject.tube(sk.origin, q)
    ctube = EnvelopeObject.coordinate_tube(q, sk)
    if box is None:
        box = default_box(g, tube)
    ell = tube.characteristic_length(g)
    if tol is None:
        tol = 1e-6 * ell ** 4
    if sample_tol is None:
        sample_tol = 1e-16 * ell ** 4

    def sample(obj):
        try:
            return sample_envelope(g, obj, box, grid, sample_tol)
        except EmptyEnvelope:
            return None

    st, sc = sample(tube), sample(ctube)
    r_tc = (float(np.max(np.abs(envelope_value(g, tube, sc.points, strict=False))))
            if sc is not None else math.inf)
    r_ct = (float(np.max(np.abs(envelope_value(g, ctube, st.points, strict=False))))
            if st is not None else math.inf)
    ext_t = transverse_extent(st.points, sk.origin, q) if st is not None else math.nan
    ext_c = transverse_extent(sc.points, sk.origin, q) if sc is not None else math.nan
    return CoincidenceReport(
        coincide=bool(r_tc <= tol and r_ct <= tol),
        tube_residual_on_coordinate_tube=r_tc,
        coordinate_residual_on_tube=r_ct,
        tol=tol, tube=st, coordinate_tube=sc,
        tube_transverse_extent=ext_t, coordinate_transverse_extent=ext_c,
    )
