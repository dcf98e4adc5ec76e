"""Planar convex polygons: validation, inner parallel bodies and Steiner data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .quadrature import integrate

CONVEXITY_RTOL = 1e-12
_MERGE_RTOL = 1e-10


class GeometryError(ValueError):
    """Invalid or degenerate polygon input."""

    def __init__(self, message: str, vertex: Optional[int] = None):
        if vertex is not None:
            message = f"{message} (vertex {vertex})"
        super().__init__(message)
        self.vertex = vertex


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon with counterclockwise vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices must be an (n, 2) array")
        if len(v) < 3:
            raise GeometryError(f"need at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite vertex coordinates")
        _validate(v)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and np.array_equal(
            self.vertices, other.vertices
        )

    __hash__ = None

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.hypot(*self.edges.T)

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normals, one per edge ``v[i] -> v[i+1]``."""
        e = self.edges / self.edge_lengths[:, None]
        return np.column_stack([e[:, 1], -e[:, 0]])

    @property
    def offsets(self) -> np.ndarray:
        """Right-hand sides ``c`` of the edge half-planes ``n . x <= c``."""
        return np.einsum("ij,ij->i", self.normals, self.vertices)

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.max(np.hypot(*(v[:, None, :] - v[None, :, :]).T)))

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    def scaled(self, s: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices * s)

    def translated(self, shift: Sequence[float]) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.asarray(shift, dtype=float))

    def interior_angles(self) -> np.ndarray:
        return math.pi - _turning_angles(self.vertices)


@dataclass(frozen=True)
class GeometricSummary:
    area: float
    perimeter: float
    inradius: float
    quermass: tuple[float, float, float]

    @property
    def isoperimetric_deficit(self) -> float:
        return self.perimeter**2 - 4.0 * math.pi * self.area


@dataclass
class InnerBodyProfile:
    """Samples of the inner parallel bodies on a grid of distances ``t``."""

    t: np.ndarray
    perimeter: np.ndarray
    area: np.ndarray
    perimeter_rate: np.ndarray
    polygons: list = field(default_factory=list)

    @property
    def min_rate(self) -> float:
        return float(np.min(self.perimeter_rate)) if len(self.perimeter_rate) else math.inf


# --- low-level helpers -------------------------------------------------------


def _shoelace(v: np.ndarray) -> float:
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _turning_angles(v: np.ndarray) -> np.ndarray:
    """Exterior turning angle at each vertex of a counterclockwise polygon."""
    e = np.roll(v, -1, axis=0) - v
    prev = np.roll(e, 1, axis=0)
    return np.arctan2(_cross(prev, e), np.einsum("ij,ij->i", prev, e))


def _validate(v: np.ndarray) -> None:
    n = len(v)
    scale = float(np.max(np.ptp(v, axis=0)))
    if scale <= 0:
        raise GeometryError("all vertices coincide")
    e = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(*e.T)
    for i in range(n):
        if lengths[i] <= _MERGE_RTOL * scale:
            raise GeometryError("repeated point", (i + 1) % n)
    turn = _cross(np.roll(e, 1, axis=0), e)
    for i in range(n):
        if turn[i] <= CONVEXITY_RTOL * scale * scale:
            kind = "clockwise or reflex turn" if turn[i] < 0 else "collinear vertex"
            raise GeometryError(f"not strictly convex counterclockwise: {kind}", i)
    winding = float(_turning_angles(v).sum())
    if abs(winding - 2 * math.pi) > 1e-6:
        raise GeometryError(f"polygon winds {winding / (2 * math.pi):.3f} times")


def clip_halfplane(v: np.ndarray, normal: np.ndarray, c: float, tol: float = 0.0) -> np.ndarray:
    """Intersect a convex polygon with ``{x : normal . x <= c}``."""
    if len(v) == 0:
        return v
    d = v @ normal - c
    inside = d <= tol
    if inside.all():
        return v
    if not inside.any():
        return v[:0]
    d_next = np.roll(d, -1)
    crossing = inside != np.roll(inside, -1)
    denom = np.where(crossing, d - d_next, 1.0)
    s = np.where(crossing, d / denom, 0.0)
    p = v + s[:, None] * (np.roll(v, -1, axis=0) - v)
    points = np.stack([v, p], axis=1).reshape(-1, 2)
    mask = np.stack([inside, crossing], axis=1).reshape(-1)
    return points[mask]


def _inset_raw(poly: ConvexPolygon, t: float) -> np.ndarray:
    """Vertices of the intersection of all edge half-planes moved inward by ``t``."""
    tol = 1e-14 * poly.diameter
    v = np.array(poly.vertices)
    for n, c in zip(poly.normals, poly.offsets - t):
        v = clip_halfplane(v, n, c, tol)
        if len(v) == 0:
            break
    return v


def _clean(v: np.ndarray, scale: float) -> Optional[np.ndarray]:
    """Drop near-duplicate and collinear vertices; None when degenerate."""
    if len(v) < 3:
        return None
    pts = [v[0]]
    for p in v[1:]:
        if np.hypot(*(p - pts[-1])) > _MERGE_RTOL * scale:
            pts.append(p)
    if len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= _MERGE_RTOL * scale:
        pts.pop()
    w = np.array(pts)
    changed = True
    while changed and len(w) >= 3:
        e = np.roll(w, -1, axis=0) - w
        turn = _cross(np.roll(e, 1, axis=0), e)
        keep = turn > CONVEXITY_RTOL * scale * scale
        changed = not keep.all()
        w = w[keep]
    if len(w) < 3 or _shoelace(w) <= 1e-14 * scale * scale:
        return None
    return w


def _perimeter_raw(v: np.ndarray) -> float:
    if len(v) < 2:
        return 0.0
    return float(np.hypot(*(np.roll(v, -1, axis=0) - v).T).sum())


# --- public operations -------------------------------------------------------


def inner_parallel_body(poly: ConvexPolygon, t: float) -> Optional[ConvexPolygon]:
    """Points at distance more than ``t`` from the boundary, or None when empty."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return poly
    w = _clean(_inset_raw(poly, t), poly.diameter)
    return None if w is None else ConvexPolygon(w)


def perimeter_at(poly: ConvexPolygon, t: float) -> float:
    """Perimeter of the inner parallel body by direct half-plane clipping.

    Near the inradius the body degenerates to a segment and the returned value
    tends to twice its length, which is the left limit of the profile.
    """
    return _perimeter_raw(_inset_raw(poly, t))


def area_at(poly: ConvexPolygon, t: float) -> float:
    return _shoelace(_inset_raw(poly, t))


def inradius(poly: ConvexPolygon, iterations: int = 60) -> float:
    """Largest ``t`` with a nonempty inner parallel body, by bisection."""
    lo, hi = 0.0, 2.0 * poly.area / poly.perimeter * (1 + 1e-9)
    stop = 1e-12 * poly.diameter
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if len(_inset_raw(poly, mid)):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * stop:
            break
    return lo


def summarize(poly: ConvexPolygon) -> GeometricSummary:
    area, perimeter = poly.area, poly.perimeter
    return GeometricSummary(
        area=area,
        perimeter=perimeter,
        inradius=inradius(poly),
        quermass=(area, perimeter / 2.0, math.pi),
    )


@dataclass(frozen=True)
class _Segment:
    t0: float
    perimeter0: float
    area0: float
    rate: float
    n_vertices: int


class ParallelProfile:
    """Exact piecewise-linear perimeter profile of the inner parallel bodies.

    Between consecutive events (an inset edge shrinking to a point) the active
    vertex set is fixed and ``-d/dt |boundary| = 2 sum cot(theta_i / 2)`` over
    the interior angles, so perimeter is linear and area quadratic in ``t``.
    Each event polygon is recomputed by clipping the original polygon, so
    errors do not accumulate along the sweep.
    """

    def __init__(self, poly: ConvexPolygon):
        self.poly = poly
        scale = poly.diameter
        segments: list[_Segment] = []
        t = 0.0
        w: Optional[np.ndarray] = np.array(poly.vertices)
        for _ in range(4 * len(poly) + 4):
            if w is None:
                break
            tan_half = np.tan(0.5 * _turning_angles(w))
            lengths = np.hypot(*(np.roll(w, -1, axis=0) - w).T)
            edge_rate = tan_half + np.roll(tan_half, -1)
            dt = float(np.min(lengths / edge_rate))
            segments.append(
                _Segment(t, _perimeter_raw(w), _shoelace(w), 2.0 * float(tan_half.sum()), len(w))
            )
            t += dt
            w = _clean(_inset_raw(poly, t), scale)
        else:
            raise GeometryError("inner parallel sweep did not terminate")
        self.segments = segments
        self.inradius = t
        self.events = [s.t0 for s in segments[1:]]

    def _locate(self, t: np.ndarray) -> np.ndarray:
        starts = np.array([s.t0 for s in self.segments])
        return np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)

    def _check_range(self, t: np.ndarray) -> None:
        tol = 1e-12 * self.poly.diameter
        if np.any(t < -tol) or np.any(t > self.inradius + tol):
            raise ValueError(f"distances outside [0, inradius={self.inradius}]")

    def perimeter(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        k = self._locate(t)
        p0 = np.array([s.perimeter0 for s in self.segments])[k]
        rate = np.array([s.rate for s in self.segments])[k]
        t0 = np.array([s.t0 for s in self.segments])[k]
        return p0 - rate * (t - t0)

    def area(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        k = self._locate(t)
        seg = self.segments
        tau = t - np.array([s.t0 for s in seg])[k]
        p0 = np.array([s.perimeter0 for s in seg])[k]
        rate = np.array([s.rate for s in seg])[k]
        a0 = np.array([s.area0 for s in seg])[k]
        return np.maximum(a0 - p0 * tau + 0.5 * rate * tau * tau, 0.0)

    def rate(self, t) -> np.ndarray:
        """``-d/dt`` of the perimeter, right-continuous at events."""
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        return np.array([s.rate for s in self.segments])[self._locate(t)]

    def distance_of_area(self, a: float) -> float:
        """Inverse of the (strictly decreasing) area profile."""
        if not 0 <= a <= self.poly.area:
            raise ValueError("area outside the profile range")
        lo, hi = 0.0, self.inradius
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.area(mid) > a:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * self.inradius:
                break
        return 0.5 * (lo + hi)


def level_profiles(
    poly: ConvexPolygon, grid, *, with_polygons: bool = False
) -> InnerBodyProfile:
    """Perimeter, area and perimeter decay rate of the inner bodies on ``grid``."""
    profile = ParallelProfile(poly)
    t = np.asarray(grid, dtype=float)
    polygons = [inner_parallel_body(poly, float(s)) for s in t] if with_polygons else []
    return InnerBodyProfile(
        t=t,
        perimeter=profile.perimeter(t),
        area=profile.area(t),
        perimeter_rate=profile.rate(t),
        polygons=polygons,
    )


def coarea_area(poly: ConvexPolygon, rtol: float = 1e-12) -> float:
    """``integral_0^inradius |boundary of inner body at t| dt`` by direct clipping.

    Panels are pinned at the events of the parallel sweep; the integrand is
    evaluated by clipping, independently of the event-tracked slopes.
    """
    profile = ParallelProfile(poly)

    def f(ts):
        return np.array([perimeter_at(poly, float(s)) for s in ts])

    return integrate(
        f,
        0.0,
        profile.inradius,
        breakpoints=profile.events,
        atol=rtol * poly.area / max(profile.inradius, 1e-300),
        rtol=rtol,
    )


def outer_parallel_body(poly: ConvexPolygon, rho: float) -> tuple[float, float]:
    """Area and perimeter of the Minkowski sum with a disk of radius ``rho``.

    Computed from the boundary (offset edges joined by circular arcs) with
    Green's theorem, independently of the Steiner polynomial.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    v, n = poly.vertices, poly.normals
    m = len(v)
    twice_area = 0.0
    perimeter = 0.0
    for i in range(m):
        p = v[i] + rho * n[i]
        q = v[(i + 1) % m] + rho * n[i]
        twice_area += p[0] * q[1] - p[1] * q[0]
        perimeter += float(np.hypot(*(q - p)))
        # arc around vertex i+1 from normal i to normal i+1
        c = v[(i + 1) % m]
        a0 = math.atan2(n[i][1], n[i][0])
        a1 = math.atan2(n[(i + 1) % m][1], n[(i + 1) % m][0])
        sweep = (a1 - a0) % (2 * math.pi)
        a1 = a0 + sweep
        twice_area += rho * rho * sweep + rho * (
            c[0] * (math.sin(a1) - math.sin(a0)) - c[1] * (math.cos(a1) - math.cos(a0))
        )
        perimeter += rho * sweep
    return 0.5 * twice_area, perimeter


def steiner_outer_check(poly: ConvexPolygon, rho: float, rtol: float = 1e-10) -> float:
    """Area of the outer parallel body, checked against ``|K| + |dK| rho + pi rho^2``."""
    geometric, _ = outer_parallel_body(poly, rho)
    polynomial = poly.area + poly.perimeter * rho + math.pi * rho * rho
    if abs(geometric - polynomial) > rtol * polynomial:
        raise GeometryError(
            f"Steiner formula mismatch: geometric {geometric!r} vs polynomial {polynomial!r}"
        )
    return geometric


def inequality_checks(summary: GeometricSummary, tol: float = 1e-12) -> dict:
    """Isoperimetric and Aleksandrov-Fenchel (W1, W2) deficits in the plane.

    Raises GeometryError on a violation, which cannot happen for a valid
    convex polygon and therefore signals corrupted input.
    """
    w0, w1, w2 = summary.quermass
    iso = summary.perimeter**2 - 4.0 * math.pi * summary.area
    # (W1/|B1|)^1 >= (W0/|B1|)^(1/2) with |B1| = pi
    af01 = w1 / math.pi - math.sqrt(w0 / math.pi)
    # W2 >= d^{-(d-2)/(d-1)} |B1|^{1/(d-1)} |dK|^{(d-2)/(d-1)} = pi in d = 2
    af12 = w2 - math.pi
    inradius_ok = 0 < summary.inradius <= summary.perimeter / (2 * math.pi) * (1 + tol)
    report = {
        "isoperimetric_deficit": iso,
        "isoperimetric_ratio": 4.0 * math.pi * summary.area / summary.perimeter**2,
        "af_w0_w1_deficit": af01,
        "af_w1_w2_deficit": af12,
        "inradius_ok": inradius_ok,
    }
    scale = summary.perimeter**2
    if iso < -tol * scale or af01 < -tol * summary.perimeter or not inradius_ok:
        raise GeometryError(f"geometric inequality violated: {report}")
    return report


def regular_polygon(n: int, circumradius: float = 1.0, phase: float = 0.0) -> ConvexPolygon:
    k = np.arange(n)
    ang = phase + 2 * math.pi * k / n
    return ConvexPolygon(circumradius * np.column_stack([np.cos(ang), np.sin(ang)]))


def rectangle(width: float, height: float) -> ConvexPolygon:
    return ConvexPolygon(
        np.array([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])
    )


def unit_square() -> ConvexPolygon:
    return rectangle(1.0, 1.0)


def convex_hull(points) -> ConvexPolygon:
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, dtype=float)
    hull = ConvexHull(pts)
    return ConvexPolygon(pts[hull.vertices])
