"""World functions and the scalar calculus built on them.

Every geometric quantity in the package is computed from a world function
sigma(P, Q), half the squared distance between two points. Points carry
coordinate labels only so that concrete world functions can be written down;
nothing downstream reads the labels directly except to hand them back to
sigma.

Arrays follow one convention throughout: the last axis holds the coordinate
labels, leading axes broadcast.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import ContractViolation, ImaginaryLength, SingularSkeleton

KINDS = ("euclidean", "minkowski", "distorted", "custom")


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Convert `x` to a float array of points, checking finiteness and dim."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise ContractViolation("a point needs at least one coordinate label")
    if dim is not None and arr.shape[-1] != dim:
        raise ContractViolation(
            f"dimension mismatch: got {arr.shape[-1]} labels, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("point labels must be finite")
    return arr


def distortion_map(sigma_m, d: float, sigma0: float):
    """Piecewise map from the Minkowski world function to the distorted one.

    Spacelike values pass through unchanged, the band [0, sigma0] is scaled
    by (1 + d/sigma0), and everything above sigma0 is shifted by d.
    """
    s = np.asarray(sigma_m, dtype=float)
    out = np.where(s > sigma0, s + d, np.where(s >= 0.0, (1.0 + d / sigma0) * s, s))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WorldFunction:
    """A geometry, given entirely by its world function.

    Use the constructors :meth:`euclidean`, :meth:`minkowski`,
    :meth:`distorted` and :meth:`custom` rather than the raw fields.
    Minkowski-type charts put time in label 0; ``c`` converts it to length.
    """

    kind: str
    dim: int
    c: float = 1.0
    d: float = 0.0
    sigma0: float = 1.0
    func: Callable | None = field(default=None, compare=False, repr=False)
    distortion: Callable | None = field(default=None, compare=False, repr=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown world-function kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ContractViolation("dimension must be a positive integer")
        if self.kind in ("minkowski", "distorted") and self.dim < 2:
            raise ContractViolation("space-time needs one time and >= 1 space label")
        if not self.c > 0:
            raise ContractViolation("speed of light must be positive")
        if self.kind == "distorted":
            if not self.d >= 0:
                raise ContractViolation("distortion d must be >= 0")
            if not self.sigma0 > 0:
                raise ContractViolation("threshold sigma0 must be > 0")
        if self.kind == "custom" and self.func is None:
            raise ContractViolation("custom world function needs `func`")

    @classmethod
    def euclidean(cls, n: int) -> "WorldFunction":
        return cls("euclidean", n)

    @classmethod
    def minkowski(cls, c: float = 1.0, dim: int = 4) -> "WorldFunction":
        return cls("minkowski", dim, c=c)

    @classmethod
    def distorted(cls, d: float, sigma0: float, c: float = 1.0, dim: int = 4,
                  distortion: Callable | None = None) -> "WorldFunction":
        """Minkowski world function pushed through the piecewise distortion.

        ``distortion`` replaces the default map (signature ``D(sigma_m)``);
        it exists so tests can perturb one branch and watch what changes.
        """
        return cls("distorted", dim, c=c, d=d, sigma0=sigma0, distortion=distortion)

    @classmethod
    def custom(cls, func: Callable, dim: int, name: str = "custom") -> "WorldFunction":
        """Wrap an arbitrary vectorized ``func(P, Q) -> sigma``."""
        return cls("custom", dim, func=func, name=name)

    @property
    def is_spacetime(self) -> bool:
        return self.kind in ("minkowski", "distorted")

    def minkowski_sigma(self, p, q):
        """Undistorted space-time world function on the same chart."""
        if not self.is_spacetime:
            raise ContractViolation(f"{self.kind} geometry has no Minkowski base")
        p = as_points(p, self.dim)
        q = as_points(q, self.dim)
        delta = p - q
        dt = self.c * delta[..., 0]
        dx = delta[..., 1:]
        out = 0.5 * (dt * dt - np.sum(dx * dx, axis=-1))
        return out if np.ndim(out) else float(out)

    def __call__(self, p, q):
        p = as_points(p, self.dim)
        q = as_points(q, self.dim)
        if self.kind == "euclidean":
            delta = p - q
            out = 0.5 * np.sum(delta * delta, axis=-1)
        elif self.kind == "minkowski":
            return self.minkowski_sigma(p, q)
        elif self.kind == "distorted":
            sm = self.minkowski_sigma(p, q)
            if self.distortion is not None:
                return self.distortion(sm)
            return distortion_map(sm, self.d, self.sigma0)
        else:
            out = np.asarray(self.func(p, q), dtype=float)
        return out if np.ndim(out) else float(out)

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.is_spacetime:
            out["c"] = self.c
        if self.kind == "distorted":
            out.update(d=self.d, sigma0=self.sigma0)
        if self.kind == "custom":
            out["name"] = self.name
        return out


def evaluate_sigma(g: WorldFunction, p, q):
    return g(p, q)


class Vector(NamedTuple):
    """Ordered pair of points."""

    start: np.ndarray
    end: np.ndarray

    @classmethod
    def of(cls, start, end) -> "Vector":
        s = as_points(start)
        e = as_points(end)
        if s.shape[-1] != e.shape[-1]:
            raise ContractViolation("vector endpoints have different dimensions")
        return cls(s, e)


class Skeleton:
    """Ordered list of n+1 points P0..Pn; P0Pi are the basis vectors."""

    def __init__(self, points):
        pts = as_points(points)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ContractViolation("a skeleton needs at least two points")
        self.points = pts
        self.points.setflags(write=False)

    @property
    def origin(self) -> np.ndarray:
        return self.points[0]

    @property
    def basis_ends(self) -> np.ndarray:
        return self.points[1:]

    @property
    def n(self) -> int:
        return self.points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __repr__(self):
        return f"Skeleton({self.points.tolist()!r})"

    @classmethod
    def axes(cls, origin, scale=1.0) -> "Skeleton":
        """Origin plus one point along every chart axis."""
        o = as_points(origin)
        pts = [o] + [o + scale * e for e in np.eye(o.shape[0])]
        return cls(np.array(pts))


class IntervalClass(str, enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


def squared_length(g: WorldFunction, v: Vector):
    """|v|^2 = 2 sigma(start, end)."""
    return 2.0 * g(v.start, v.end)


def null_threshold(*points) -> float:
    scale = max(float(np.max(np.abs(p))) for p in points)
    return 1e-12 * scale * scale


def classify(g: WorldFunction, v: Vector) -> IntervalClass:
    s = g(v.start, v.end)
    if abs(s) <= null_threshold(v.start, v.end):
        return IntervalClass.NULL
    return IntervalClass.TIMELIKE if s > 0 else IntervalClass.SPACELIKE


def real_length(sq_len: float) -> float:
    if sq_len < 0:
        raise ImaginaryLength(f"squared length {sq_len!r} is negative")
    return math.sqrt(sq_len)


def scalar_product(g: WorldFunction, v: Vector, w: Vector):
    """(P0P1.Q0Q1) = s(P0,Q1) + s(P1,Q0) - s(P0,Q0) - s(P1,Q1)."""
    p0, p1 = v
    q0, q1 = w
    return g(p0, q1) + g(p1, q0) - g(p0, q0) - g(p1, q1)


def _basis_products(g: WorldFunction, origin, ends_a, ends_b):
    """Matrix of (P0A_i . P0B_k) for the two point lists A and B."""
    a = np.asarray(ends_a)[:, None, :]
    b = np.asarray(ends_b)[None, :, :]
    return g(origin, b) + g(a, origin) - g(origin, origin) - g(a, b)


def gram_matrix(g: WorldFunction, sk: Skeleton) -> np.ndarray:
    return np.asarray(_basis_products(g, sk.origin, sk.basis_ends, sk.basis_ends), dtype=float)


def metric_tensor(g: WorldFunction, sk: Skeleton, rtol: float = 1e-12):
    """Covariant metric g_ik = (P0Pi.P0Pk) and its inverse g^ik.

    Raises SingularSkeleton for repeated points or when the smallest singular
    value falls below ``rtol`` times the largest.
    """
    pts = sk.points
    if sk.dim != g.dim:
        raise ContractViolation("skeleton dimension does not match geometry")
    diffs = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=-1)
    np.fill_diagonal(diffs, np.inf)
    if np.any(diffs == 0):
        raise SingularSkeleton("skeleton contains a repeated point")
    gmat = gram_matrix(g, sk)
    sv = np.linalg.svd(gmat, compute_uv=False)
    if not sv[0] > 0 or sv[-1] <= rtol * sv[0]:
        raise SingularSkeleton(
            f"metric tensor is singular (singular values {sv.tolist()})")
    ident = np.eye(sk.n)
    if np.array_equal(gmat, gmat.T):
        ginv = scipy.linalg.solve(gmat, ident, assume_a="sym")
    else:
        ginv = np.linalg.solve(gmat, ident)
    return gmat, ginv


def gram_determinant(g: WorldFunction, sk: Skeleton) -> float:
    """F_n of the skeleton; vanishes whenever n exceeds the dimension."""
    if sk.dim != g.dim:
        raise ContractViolation("skeleton dimension does not match geometry")
    return float(np.linalg.det(gram_matrix(g, sk)))


def covariant_coordinates(g: WorldFunction, sk: Skeleton, p, check: bool = True):
    """x_i(P) = (P0Pi.P0P) for i = 1..n; vectorized over leading axes of p."""
    if check:
        metric_tensor(g, sk)
    p = as_points(p, g.dim)
    o = sk.origin
    ends = sk.basis_ends
    pe = p[..., None, :]
    return g(o, pe) + g(ends, o) - g(o, o) - g(ends, pe)


def quadratic_sigma(ginv: np.ndarray, x, y):
    """Half the quadratic form g^ik dx_i dx_k between two coordinate tuples."""
    delta = np.asarray(x) - np.asarray(y)
    return 0.5 * np.einsum("...i,ij,...j->...", delta, ginv, delta)


def distortion_from_quantum(hbar: float, b: float, c: float) -> float:
    """Distortion d = hbar / (2 b c) tying the geometry to quantum scale."""
    for name, val in (("hbar", hbar), ("b", b), ("c", c)):
        if not val > 0:
            raise ContractViolation(f"{name} must be positive, got {val!r}")
    return 0.5 * hbar / (b * c)
