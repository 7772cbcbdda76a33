"""Spatial meshes, time partitions and exact quadrature rules.

Meshes are fixed across time slabs: 1D uniform intervals or 2D structured
triangulations of the unit square (each grid square split along the
bottom-left/top-right diagonal), plus a plain-text import path for general
triangle meshes.  Faces carry a unit normal pointing out of their first
incident element, a boundary flag, and the face size h_e (average of the
incident element diameters).

Quadrature is exact for polynomials up to the declared degree:

- intervals and time use Gauss-Legendre,
- triangles use a collapsed-coordinate tensor rule (Gauss-Legendre times
  Gauss-Jacobi with weight (1 - v)), which integrates any bivariate
  polynomial exactly with ceil((degree+1)/2) points per direction,
- space-time rules are tensor products of a spatial rule with a
  Gauss-Legendre rule in time.

Point faces in 1D carry measure one, so face integrals reduce to time
integrals of point traces and the 1D and 2D form code stays identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import roots_jacobi


# -- quadrature ----------------------------------------------------------


@dataclass
class QuadRule:
    """Quadrature nodes in physical space-time coordinates.

    points: (n, k) array; for space-time rules k = d + 1 with time last,
    for purely spatial rules k = d.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]

    def integrate(self, f) -> float:
        return float(self.weights @ f(self.points))


def gauss_legendre_01(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(max(n, 1))
    return 0.5 * (x + 1.0), 0.5 * w


def _npts(degree: int) -> int:
    if degree < 0:
        raise ValueError(f"quadrature degree must be nonnegative, got {degree}")
    return degree // 2 + 1


def interval_rule(a: float, b: float, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre_01(_npts(degree))
    return a + (b - a) * x, (b - a) * w


def triangle_rule(vertices: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exact rule on a triangle via the collapsed-coordinate transform.

    Maps (u, v) in [0,1]^2 to barycentric (r, s) = (u (1 - v), v); the
    Jacobian factor (1 - v) is absorbed into a Gauss-Jacobi rule, keeping
    all weights positive.
    """
    n = _npts(degree)
    gu, wu = gauss_legendre_01(n)
    xj, wj = roots_jacobi(n, 1.0, 0.0)        # weight (1 - x) on [-1, 1]
    gv = 0.5 * (xj + 1.0)
    wv = 0.25 * wj                            # includes the (1 - v) factor
    uu, vv = np.meshgrid(gu, gv, indexing="ij")
    r = (uu * (1.0 - vv)).ravel()
    s = vv.ravel()
    w2 = np.outer(wu, wv).ravel()
    v0, v1, v2 = np.asarray(vertices, dtype=float)
    pts = v0[None, :] + np.outer(r, v1 - v0) + np.outer(s, v2 - v0)
    area2 = abs((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1]))
    return pts, w2 * area2


def segment_rule(p0: np.ndarray, p1: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre_01(_npts(degree))
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pts = p0[None, :] + np.outer(x, p1 - p0)
    return pts, w * float(np.linalg.norm(p1 - p0))


# -- mesh entities -------------------------------------------------------


@dataclass
class Face:
    """One skeleton face: a point in 1D, a segment in 2D.

    ``elems`` lists the incident element indices; for interior faces the
    normal points out of ``elems[0]``.  Point faces carry measure 1.
    """

    vertices: Tuple[int, ...]
    elems: Tuple[int, ...]
    normal: np.ndarray
    boundary: bool
    h_e: float
    measure: float


@dataclass
class TimePartition:
    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        if self.knots.ndim != 1 or self.knots.size < 2:
            raise ValueError("need at least two time knots")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("time knots must be strictly increasing")

    @property
    def n_slabs(self) -> int:
        return self.knots.size - 1

    @property
    def tau(self) -> np.ndarray:
        return np.diff(self.knots)

    def slab(self, n: int) -> Tuple[float, float]:
        return float(self.knots[n]), float(self.knots[n + 1])


class SpatialMesh:
    """Fixed spatial mesh of intervals (d=1) or triangles (d=2)."""

    def __init__(self, dim: int, vertices: np.ndarray, elements: np.ndarray, a) -> None:
        self.dim = dim
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim == 1:
            self.vertices = self.vertices[:, None]
        self.elements = np.asarray(elements, dtype=int)
        self.n_elems = self.elements.shape[0]
        a_arr = np.broadcast_to(np.asarray(a, dtype=float), (self.n_elems,)).copy()
        if np.any(a_arr <= 0):
            raise ValueError("wave-speed coefficient must be positive on every element")
        self.a = a_arr
        self.h = self._diameters()
        self.measures = self._measures()
        self.faces: List[Face] = self._build_faces()
        self.interior_faces = [i for i, f in enumerate(self.faces) if not f.boundary]
        self.boundary_faces = [i for i, f in enumerate(self.faces) if f.boundary]
        self.c_t = self._regularity_constant()

    # spatial coordinates of an element's vertex tuple
    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def centroid(self, e: int) -> np.ndarray:
        return self.element_vertices(e).mean(axis=0)

    @property
    def a_min(self) -> float:
        return float(self.a.min())

    @property
    def a_max(self) -> float:
        return float(self.a.max())

    def _diameters(self) -> np.ndarray:
        h = np.zeros(self.n_elems)
        for e in range(self.n_elems):
            pts = self.element_vertices(e)
            dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            h[e] = dist.max()
        return h

    def _measures(self) -> np.ndarray:
        m = np.zeros(self.n_elems)
        for e in range(self.n_elems):
            pts = self.element_vertices(e)
            if self.dim == 1:
                m[e] = abs(pts[1, 0] - pts[0, 0])
            else:
                v0, v1, v2 = pts
                m[e] = 0.5 * abs(
                    (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1])
                )
        return m

    def _inradius(self, e: int) -> float:
        if self.dim == 1:
            return 0.5 * self.measures[e]
        pts = self.element_vertices(e)
        sides = [np.linalg.norm(pts[(i + 1) % 3] - pts[i]) for i in range(3)]
        return 2.0 * self.measures[e] / sum(sides)

    def _regularity_constant(self) -> float:
        return float(max(self.h[e] / self._inradius(e) for e in range(self.n_elems)))

    def _build_faces(self) -> List[Face]:
        if self.dim == 1:
            return self._build_faces_1d()
        return self._build_faces_2d()

    def _build_faces_1d(self) -> List[Face]:
        # Vertex v is shared by the element ending at v and the one starting
        # at v; elements are assumed sorted left to right.
        faces = []
        n = self.n_elems
        order = np.argsort(self.vertices[self.elements[:, 0], 0])
        left_of = {}
        right_of = {}
        for e in order:
            left_of[self.elements[e, 1]] = e
            right_of[self.elements[e, 0]] = e
        for v in range(self.vertices.shape[0]):
            incident = []
            if v in left_of:
                incident.append(left_of[v])
            if v in right_of:
                incident.append(right_of[v])
            if not incident:
                continue
            boundary = len(incident) == 1
            if boundary:
                e0 = incident[0]
                # outward: +1 at the right end of the element, -1 at the left
                normal = np.array([1.0 if v == self.elements[e0, 1] else -1.0])
                elems = (e0,)
                h_e = self.h[e0]
            else:
                elems = (left_of[v], right_of[v])   # first element lies left
                normal = np.array([1.0])
                h_e = 0.5 * (self.h[elems[0]] + self.h[elems[1]])
            faces.append(Face((v,), elems, normal, boundary, float(h_e), 1.0))
        return faces

    def _build_faces_2d(self) -> List[Face]:
        edge_elems = {}
        for e in range(self.n_elems):
            tri = self.elements[e]
            for i in range(3):
                key = tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3]))))
                edge_elems.setdefault(key, []).append(e)
        faces = []
        for key in sorted(edge_elems):
            elems = edge_elems[key]
            if len(elems) > 2:
                raise ValueError(f"edge {key} shared by more than two elements")
            e0 = elems[0]
            p0, p1 = self.vertices[key[0]], self.vertices[key[1]]
            tangent = p1 - p0
            normal = np.array([tangent[1], -tangent[0]])
            normal /= np.linalg.norm(normal)
            # orient out of the first element
            other = [v for v in self.elements[e0] if v not in key][0]
            if normal @ (self.vertices[other] - p0) > 0:
                normal = -normal
            boundary = len(elems) == 1
            h_e = self.h[e0] if boundary else 0.5 * (self.h[elems[0]] + self.h[elems[1]])
            faces.append(
                Face(key, tuple(elems), normal, boundary, float(h_e), float(np.linalg.norm(tangent)))
            )
        return faces

    def summary(self) -> dict:
        return {
            "dim": self.dim,
            "n_vertices": int(self.vertices.shape[0]),
            "n_elements": int(self.n_elems),
            "n_faces": len(self.faces),
            "n_interior_faces": len(self.interior_faces),
            "h_min": float(self.h.min()),
            "h_max": float(self.h.max()),
            "a_min": self.a_min,
            "a_max": self.a_max,
            "shape_regularity": self.c_t,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


# -- mesh builders -------------------------------------------------------


def build_mesh_1d(n_elems: int, domain: Tuple[float, float] = (0.0, 1.0), a=1.0) -> SpatialMesh:
    """Uniform interval mesh of (domain[0], domain[1])."""
    if n_elems < 1:
        raise ValueError("need at least one element")
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= lo:
        raise ValueError(f"empty domain ({lo}, {hi})")
    vertices = np.linspace(lo, hi, n_elems + 1)
    elements = np.column_stack([np.arange(n_elems), np.arange(1, n_elems + 1)])
    return SpatialMesh(1, vertices, elements, a)


def build_mesh_2d_unit_square(n: int, a=1.0) -> SpatialMesh:
    """Structured triangulation of the unit square.

    Each of the n x n grid squares is split along the diagonal from its
    bottom-left to its top-right corner, so every triangle has diameter
    sqrt(2)/n.
    """
    if n < 1:
        raise ValueError("need at least one square per side")
    coords = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    vid = lambda i, j: i * (n + 1) + j
    elements = []
    for i in range(n):
        for j in range(n):
            a00, a10 = vid(i, j), vid(i + 1, j)
            a11, a01 = vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a00, a10, a11))
            elements.append((a00, a11, a01))
    return SpatialMesh(2, vertices, np.array(elements), a)


def load_mesh_2d(path: str, a=1.0) -> SpatialMesh:
    """Read a plain-text triangle mesh: "v x y" lines, then "e i j k" lines."""
    vertices = []
    elements = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'v x y'")
                vertices.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "e":
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 'e i j k'")
                elements.append(tuple(int(q) for q in parts[1:]))
            else:
                raise ValueError(f"{path}:{lineno}: unknown record {parts[0]!r}")
    if not vertices or not elements:
        raise ValueError(f"{path}: mesh file contains no usable records")
    return SpatialMesh(2, np.array(vertices), np.array(elements), a)


def build_time_partition(T: float, N: int) -> TimePartition:
    """Uniform partition of (0, T) into N slabs."""
    if T <= 0:
        raise ValueError(f"final time must be positive, got {T}")
    if N < 1:
        raise ValueError("need at least one slab")
    return TimePartition(np.linspace(0.0, float(T), N + 1))


# -- quadrature over mesh entities ----------------------------------------


def _spatial_rule(mesh: SpatialMesh, elem: int, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    if mesh.dim == 1:
        x0, x1 = mesh.element_vertices(elem)[:, 0]
        pts, w = interval_rule(min(x0, x1), max(x0, x1), degree)
        return pts[:, None], w
    return triangle_rule(mesh.element_vertices(elem), degree)


def _face_spatial_rule(mesh: SpatialMesh, face: Face, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    if mesh.dim == 1:
        return mesh.vertices[list(face.vertices)].reshape(1, 1), np.array([face.measure])
    p0, p1 = mesh.vertices[list(face.vertices)]
    return segment_rule(p0, p1, degree)


def _tensor_time(pts_x: np.ndarray, w_x: np.ndarray, interval: Tuple[float, float],
                 degree: int) -> Tuple[np.ndarray, np.ndarray]:
    t, wt = interval_rule(interval[0], interval[1], degree)
    nx, nt = pts_x.shape[0], t.shape[0]
    pts = np.empty((nx * nt, pts_x.shape[1] + 1))
    pts[:, :-1] = np.repeat(pts_x, nt, axis=0)
    pts[:, -1] = np.tile(t, nx)
    return pts, np.repeat(w_x, nt) * np.tile(wt, nx)


def volume_quadrature(mesh: SpatialMesh, elem: int, interval: Tuple[float, float],
                      degree: int) -> QuadRule:
    """Rule exact to ``degree`` on the space-time element K x I_n."""
    px, wx = _spatial_rule(mesh, elem, degree)
    pts, w = _tensor_time(px, wx, interval, degree)
    return QuadRule(pts, w, degree)


def face_time_quadrature(mesh: SpatialMesh, face_index: int, interval: Tuple[float, float],
                         degree: int) -> QuadRule:
    """Rule exact to ``degree`` on the space-time face e x I_n."""
    face = mesh.faces[face_index]
    px, wx = _face_spatial_rule(mesh, face, degree)
    pts, w = _tensor_time(px, wx, interval, degree)
    return QuadRule(pts, w, degree)


def trace_quadrature(mesh: SpatialMesh, t: float, degree: int, *, element: int | None = None,
                     face: int | None = None) -> QuadRule:
    """Spatial rule on an element or face at the frozen time ``t``."""
    if (element is None) == (face is None):
        raise ValueError("pass exactly one of element= or face=")
    if element is not None:
        px, wx = _spatial_rule(mesh, element, degree)
    else:
        px, wx = _face_spatial_rule(mesh, mesh.faces[face], degree)
    pts = np.column_stack([px, np.full(px.shape[0], float(t))])
    return QuadRule(pts, wx, degree)
