"""P1 finite elements on convex polygons: Robin and Dirichlet torsion, Steklov spectrum.

Meshes are built once per polygon and refined uniformly, so a sequence of
meshes is nested and suitable for Richardson extrapolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import Delaunay

from .geometry import ConvexPolygon

MAX_NODES = 200_000
RESONANCE_MARGIN = 1e-6
PIVOT_RTOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh request or mesh that violates a structural invariant."""


class AssemblyError(ValueError):
    def __init__(self, message: str, triangle: Optional[int] = None):
        super().__init__(message)
        self.triangle = triangle


class ResonanceError(ArithmeticError):
    """The Robin matrix is (nearly) singular at the requested parameter."""

    def __init__(self, message: str, alpha: float, nearest_sigma: Optional[float]):
        super().__init__(message)
        self.alpha = alpha
        self.nearest_sigma = nearest_sigma


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    polygon: ConvexPolygon

    @property
    def h(self) -> float:
        e = self._edge_vectors()
        return float(np.sqrt((e**2).sum(-1)).max())

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.boundary_edges[:, 0]

    @property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def _edge_vectors(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)

    def check(self) -> None:
        """Raise :class:`MeshError` if a structural invariant fails."""
        areas = self.areas
        if np.any(areas <= 1e-14 * self.polygon.area):
            raise MeshError(f"triangle {int(np.argmin(areas))} is degenerate or inverted")
        if not math.isclose(areas.sum(), self.polygon.area, rel_tol=1e-10):
            raise MeshError("triangles do not tile the polygon")
        edges = _sorted_edges(self.triangles)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge")
        loop = self.boundary_edges
        if not np.array_equal(loop[1:, 0], loop[:-1, 1]) or loop[-1, 1] != loop[0, 0]:
            raise MeshError("boundary edges do not form one closed loop")
        if int((counts == 1).sum()) != len(loop):
            raise MeshError("boundary loop misses free edges")
        dist = _edge_distance(self.polygon, self.nodes[loop.ravel()])
        if np.any(dist > 1e-11 * self.polygon.diameter):
            raise MeshError("boundary node off the polygon boundary")

    def to_json(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _sorted_edges(tri: np.ndarray) -> np.ndarray:
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    return np.sort(e, axis=1)


def _edge_distance(poly: ConvexPolygon, pts: np.ndarray) -> np.ndarray:
    """Distance of each point to the polygon boundary, for points inside."""
    return np.abs(poly.offsets[None, :] - pts @ poly.normals.T).min(axis=1)


def _boundary_loop(tri: np.ndarray) -> np.ndarray:
    """Counterclockwise loop of boundary edges from positively oriented triangles."""
    directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    free = directed[counts[inverse.ravel()] == 1]
    nxt = dict(zip(free[:, 0].tolist(), free[:, 1].tolist()))
    start = int(free[:, 0].min())
    loop = [start]
    while True:
        node = nxt[loop[-1]]
        if node == start:
            break
        loop.append(node)
        if len(loop) > len(free):
            raise MeshError("boundary edges do not form one closed loop")
    if len(loop) != len(free):
        raise MeshError("boundary has more than one component")
    a = np.asarray(loop)
    return np.stack([a, np.roll(a, -1)], axis=1)


def triangulate(poly: ConvexPolygon, target_h: float) -> TriangleMesh:
    """Deterministic P1 mesh of a convex polygon with longest edge at most ``target_h``.

    Each polygon edge is split into equal segments no longer than ``target_h``,
    the interior is seeded with a hexagonal lattice kept away from the
    boundary, and the point set is Delaunay triangulated.  Any triangle edge
    still longer than ``target_h`` triggers uniform refinement.
    """
    if not target_h > 0:
        raise MeshError(f"target_h must be positive, got {target_h}")
    projected = 2.0 * poly.area / (math.sqrt(3) / 2 * target_h**2) + poly.perimeter / target_h
    if projected > MAX_NODES:
        raise MeshError(
            f"target_h={target_h} projects {projected:.0f} nodes, above the limit {MAX_NODES}"
        )
    step = 0.75 * target_h
    v = poly.vertices
    turning = math.pi - poly.interior_angles()
    slope = min(1e-3, 0.25 * float(turning.min()))
    boundary, bulge = [], []
    for i, L in enumerate(poly.edge_lengths):
        m = max(1, math.ceil(L / step))
        s = np.arange(m)[:, None] / m
        boundary.append(v[i] + s * (v[(i + 1) % len(v)] - v[i]))
        bulge.append(slope * L * s * (1 - s) * poly.normals[i])
    boundary = np.concatenate(boundary)
    # collinear edge points are bowed outward for the connectivity only, so
    # rounding cannot drop them from the hull or create slivers along an edge;
    # the slope stays below the smallest turning angle to keep vertices convex
    bowed = boundary + np.concatenate(bulge)
    a = step
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    ny = int(math.ceil((hi[1] - lo[1]) / (a * math.sqrt(3) / 2))) + 1
    nx = int(math.ceil((hi[0] - lo[0]) / a)) + 2
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    lattice = np.stack(
        [lo[0] + a * (ii + 0.5 * (jj % 2)), lo[1] + a * math.sqrt(3) / 2 * jj], axis=-1
    ).reshape(-1, 2)
    depth = (poly.offsets[None, :] - lattice @ poly.normals.T).min(axis=1)
    lattice = lattice[depth > 0.55 * a]
    pts = np.concatenate([boundary, lattice])
    tri = Delaunay(np.concatenate([bowed, lattice])).simplices.astype(np.int64)
    p = pts[tri]
    flip = _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    mesh = TriangleMesh(pts, tri, _boundary_loop(tri), poly)
    while mesh.h > target_h * (1 + 1e-12):
        mesh = refine(mesh)
    mesh.check()
    return mesh


def refine(mesh: TriangleMesh) -> TriangleMesh:
    """Uniform 4-way refinement; boundary midpoints stay on the polygon edges."""
    tri = mesh.triangles
    edges = _sorted_edges(tri)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    n = mesh.n_nodes
    if n + len(uniq) > MAX_NODES:
        raise MeshError(f"refinement would exceed {MAX_NODES} nodes")
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.concatenate([mesh.nodes, mids])
    nt = len(tri)
    m01 = n + inverse[:nt]
    m12 = n + inverse[nt : 2 * nt]
    m20 = n + inverse[2 * nt :]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    new = np.concatenate(
        [
            np.stack([a, m01, m20], 1),
            np.stack([m01, b, m12], 1),
            np.stack([m20, m12, c], 1),
            np.stack([m01, m12, m20], 1),
        ]
    )
    lookup = {tuple(e): n + k for k, e in enumerate(uniq.tolist())}
    loop = []
    for i, j in mesh.boundary_edges.tolist():
        m = lookup[(min(i, j), max(i, j))]
        loop.append((i, m))
        loop.append((m, j))
    return TriangleMesh(nodes, new, np.asarray(loop, dtype=np.int64), mesh.polygon)


def mesh_sequence(poly: ConvexPolygon, h0: float, levels: int = 3) -> list[TriangleMesh]:
    """Nested meshes with mesh sizes about ``h0, h0/2, h0/4, ...``."""
    meshes = [triangulate(poly, h0)]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


@dataclass(frozen=True, eq=False)
class FemSystem:
    K: sp.csr_matrix
    B: sp.csr_matrix
    M: sp.csr_matrix
    b: np.ndarray
    mesh: TriangleMesh

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.mesh.boundary_nodes

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.mesh.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)


def assemble(mesh: TriangleMesh) -> FemSystem:
    """Exact P1 stiffness, boundary mass, domain mass and load vector."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas
    bad = np.flatnonzero(area <= 1e-14 * mesh.polygon.area)
    if len(bad):
        raise AssemblyError(f"degenerate triangle {int(bad[0])}", int(bad[0]))
    # gradient of the barycentric coordinate opposite each edge
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area)[:, None, None]
    Ke = area[:, None, None] * np.einsum("tik,tjk->tij", grad, grad)
    Me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    b = np.bincount(mesh.triangles.ravel(), np.repeat(area / 3.0, 3), minlength=n)
    be = mesh.boundary_edges
    L = np.sqrt(((mesh.nodes[be[:, 1]] - mesh.nodes[be[:, 0]]) ** 2).sum(1))
    Be = L[:, None, None] / 6.0 * (np.ones((2, 2)) + np.eye(2))
    brow = np.repeat(be, 2, axis=1).ravel()
    bcol = np.tile(be, (1, 2)).ravel()
    B = sp.coo_matrix((Be.ravel(), (brow, bcol)), shape=(n, n)).tocsr()
    return FemSystem(K, B, M, b, mesh)


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: np.ndarray
    tau: float
    energy_residual: float
    min_pivot_ratio: float
    alpha: float

    @property
    def energy(self) -> float:
        """Discrete energy functional at the solution, equal to ``-tau``."""
        return self.energy_residual - self.tau


@dataclass(frozen=True, eq=False)
class SteklovResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def sigma1(self) -> float:
        return float(self.eigenvalues[1])


def _pivot_ratio(lu) -> float:
    d = np.abs(lu.U.diagonal())
    return float(d.min() / d.max())


def solve_robin_torsion(
    system: FemSystem,
    alpha: float,
    steklov: Optional[SteklovResult] = None,
    margin: float = RESONANCE_MARGIN,
) -> SolveResult:
    """Solve ``(K + alpha B) u = b`` and return the torsion ``b.u``."""
    alpha = float(alpha)
    if alpha == 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite and nonzero, got {alpha}")
    if alpha < 0 and steklov is not None:
        gap = np.abs(alpha + steklov.eigenvalues)
        j = int(np.argmin(gap))
        if gap[j] <= margin * max(1.0, abs(alpha)):
            raise ResonanceError(
                f"alpha={alpha} within {gap[j]:.3g} of discrete Steklov value",
                alpha,
                float(steklov.eigenvalues[j]),
            )
    A = (system.K + alpha * system.B).tocsc()
    try:
        lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=0.1)
        ratio = _pivot_ratio(lu)
    except RuntimeError:
        ratio = 0.0
    if ratio < PIVOT_RTOL:
        nearest = None
        if alpha < 0:
            s = steklov if steklov is not None else steklov_spectrum(system, 8)
            nearest = float(s.eigenvalues[np.argmin(np.abs(alpha + s.eigenvalues))])
        raise ResonanceError(
            f"Robin matrix near-singular at alpha={alpha} (pivot ratio {ratio:.3g})",
            alpha,
            nearest,
        )
    u = lu.solve(system.b)
    tau = float(system.b @ u)
    quad = float(u @ (A @ u))
    return SolveResult(u, tau, quad - tau, ratio, alpha)


def solve_dirichlet_torsion(system: FemSystem) -> SolveResult:
    inner = system.interior_nodes
    if len(inner) == 0:
        raise MeshError("mesh has no interior nodes; refine before a Dirichlet solve")
    Kii = system.K[inner][:, inner].tocsc()
    lu = spla.splu(Kii)
    ui = lu.solve(system.b[inner])
    u = np.zeros(system.mesh.n_nodes)
    u[inner] = ui
    tau = float(system.b @ u)
    quad = float(u @ (system.K @ u))
    return SolveResult(u, tau, quad - tau, _pivot_ratio(lu), math.inf)


def steklov_spectrum(system: FemSystem, count: int = 4, chunk: int = 256) -> SteklovResult:
    """Lowest ``count`` discrete Steklov eigenvalues via the boundary Schur complement."""
    if count < 2:
        raise ValueError("count must be at least 2")
    bnd = system.boundary_nodes
    inner = system.interior_nodes
    K = system.K.tocsr()
    Kbb = K[bnd][:, bnd].toarray()
    Bbb = system.B[bnd][:, bnd].toarray()
    if len(inner):
        Kib = K[inner][:, bnd].tocsc()
        try:
            lu = spla.splu(K[inner][:, inner].tocsc())
        except RuntimeError as exc:
            raise MeshError(f"interior stiffness factorization failed: {exc}") from exc
        S = Kbb.copy()
        for start in range(0, len(bnd), chunk):
            block = Kib[:, start : start + chunk].toarray()
            S[:, start : start + chunk] -= Kib.T @ lu.solve(block)
        S = 0.5 * (S + S.T)
    else:
        S = Kbb
    count = min(count, len(bnd))
    w, vec = scipy.linalg.eigh(S, Bbb, subset_by_index=[0, count - 1])
    w = np.where(np.abs(w) <= 1e-12 * max(abs(w[-1]), 1.0), 0.0, w)
    if w[0] < -1e-8 * max(w[1], 1.0):
        raise MeshError(f"negative Steklov value {w[0]!r}; Schur complement is not semidefinite")
    return SteklovResult(np.maximum(w, 0.0), vec, bnd)


# --- refinement study --------------------------------------------------------


@dataclass(frozen=True)
class ErrorEstimate:
    values: tuple[float, ...]
    h: tuple[float, ...]
    extrapolated: float
    budget: float
    order: float
    monotone: bool

    @property
    def finest(self) -> float:
        return self.values[-1]

    def contains(self, x: float) -> bool:
        return abs(x - self.extrapolated) <= self.budget


def richardson(values: Sequence[float], h: Sequence[float]) -> ErrorEstimate:
    """Extrapolate the last three values of a geometric refinement sequence.

    The error bar is three times the last increment, widened to cover the
    extrapolation step.  When the increments shrink without changing sign the
    observed order is ``log2`` of their ratio; otherwise the estimate falls back
    to the finest value with a bar of ten times the largest increment.
    """
    if len(values) < 3:
        raise ValueError("need at least three mesh levels")
    v1, v2, v3 = (float(x) for x in values[-3:])
    d1, d2 = v2 - v1, v3 - v2
    ratio = h[-2] / h[-1]
    scale = 1e-15 * max(abs(v3), 1e-300)
    if abs(d2) <= scale:
        return ErrorEstimate(tuple(values), tuple(h), v3, max(abs(d1), scale), math.inf, True)
    if d1 * d2 > 0 and abs(d2) < abs(d1):
        order = math.log(d1 / d2) / math.log(ratio)
        extra = v3 + d2 / (ratio**order - 1)
        budget = max(3 * abs(d2), 1.5 * abs(extra - v3))
        return ErrorEstimate(tuple(values), tuple(h), extra, budget, order, True)
    budget = 10 * max(abs(d1), abs(d2))
    return ErrorEstimate(tuple(values), tuple(h), v3, budget, math.nan, False)


@dataclass(frozen=True)
class DomainStudy:
    """Refinement study of one polygon: Dirichlet torsion, Steklov values, Robin solves."""

    h: tuple[float, ...]
    tau_dirichlet: ErrorEstimate
    sigma1: ErrorEstimate
    sigma: tuple[np.ndarray, ...] = field(repr=False)
    systems: tuple[FemSystem, ...] = field(repr=False)

    @property
    def safe_sigma1(self) -> float:
        """Lower end of the measured first Steklov value."""
        return self.sigma1.extrapolated - self.sigma1.budget

    def robin(self, alpha: float) -> ErrorEstimate:
        vals = []
        for system, sig in zip(self.systems, self.sigma):
            st = SteklovResult(sig, np.empty((0, 0)), system.boundary_nodes)
            vals.append(solve_robin_torsion(system, alpha, st).tau)
        return richardson(vals, self.h)


def study_domain(
    poly: ConvexPolygon, h0: float, levels: int = 3, count: int = 4
) -> DomainStudy:
    meshes = mesh_sequence(poly, h0, levels)
    systems = tuple(assemble(m) for m in meshes)
    h = tuple(m.h for m in meshes)
    tau = [solve_dirichlet_torsion(s).tau for s in systems]
    sig = tuple(steklov_spectrum(s, count).eigenvalues for s in systems)
    return DomainStudy(
        h=h,
        tau_dirichlet=richardson(tau, h),
        sigma1=richardson([float(s[1]) for s in sig], h),
        sigma=sig,
        systems=systems,
    )


def error_budget(
    poly: ConvexPolygon,
    alpha: Optional[float],
    h_sequence: Sequence[float],
) -> dict[str, ErrorEstimate]:
    """Richardson estimates of the torsion and of the first Steklov value.

    ``h_sequence`` must be geometric with ratio 2; the coarsest entry seeds the
    mesh and the others are reached by uniform refinement.  ``alpha=None``
    selects the Dirichlet problem.
    """
    h_sequence = [float(x) for x in h_sequence]
    if len(h_sequence) < 3:
        raise ValueError("need at least three mesh sizes")
    ratios = np.array(h_sequence[:-1]) / np.array(h_sequence[1:])
    if not np.allclose(ratios, 2.0, rtol=1e-9):
        raise ValueError("mesh sizes must halve at each level")
    study = study_domain(poly, h_sequence[0], len(h_sequence))
    tau = study.tau_dirichlet if alpha is None else study.robin(alpha)
    return {"tau": tau, "sigma1": study.sigma1}


def polygon_gap(n: int, radius: float, formula: Callable[[float], float]) -> float:
    """Geometric error term for comparing a regular n-gon with its circumscribed disk.

    The inscribed n-gon lies between the disks of radius ``radius*cos(pi/n)``
    and ``radius``; the spread of ``formula`` over that range bounds the
    difference due to replacing the disk by the polygon.
    """
    inner = radius * math.cos(math.pi / n)
    return abs(formula(radius) - formula(inner))
