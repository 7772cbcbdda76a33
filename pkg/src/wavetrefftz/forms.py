"""Interior-penalty slab forms, discrete energy and mesh-dependent norms.

One ``SlabAssembler`` serves every slab of a uniform partition: local
bases live in slab-centred frames, so element and face integrals are
slab-independent.  Elements are grouped by congruence and faces by
configuration class (incident groups, local face geometry, normal and
size); each matrix block is computed once per class and scattered to all
members, which keeps assembly cost proportional to the number of classes
rather than the number of entities.

Sign conventions on a face: the unit normal points out of the first
incident element.  With traces (f0, f1) from the two sides, the
normal-dotted scalar jump is f0 - f1, the flux trace of a side is
a * grad(f) . n, the flux jump is F0 - F1 (interior faces only) and
averages carry weight 1/2 per side (one-sided with weight 1 on the
boundary, where vector jumps and scalar averages are never used).

The slab bilinear form applied twice to the same function equals the sum
of the discrete energies at both slab ends plus the sigma_1/sigma_2
face-time terms; the time-jump contribution of the global form at an
interior knot has exactly the discrete-energy structure evaluated on the
two-sided trace difference.  Both identities are exercised by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .basis import LocalBasis
from .meshing import SpatialMesh, gauss_legendre_01, triangle_rule
from .polynomials import diff_matrix, vandermonde
from .spaces import SlabSpace

_ROUND = 12


@dataclass
class PenaltyConfig:
    """Stabilisation parameters and quadrature degrees.

    ``c_sigma0`` multiplies the mandatory jump penalty; the two optional
    face-time penalties can be switched off individually.  Quadrature
    degrees default to 2p+2 for polynomial (assembly) integrands and
    2p+6 wherever non-polynomial data enters.
    """

    c_sigma0: float = 10.0
    sigma1_enabled: bool = True
    sigma2_enabled: bool = True
    quad_degree: Optional[int] = None
    data_quad_degree: Optional[int] = None

    def __post_init__(self):
        if self.c_sigma0 <= 0:
            raise ValueError(f"c_sigma0 must be positive, got {self.c_sigma0}")

    def assembly_degree(self, p: int) -> int:
        return self.quad_degree if self.quad_degree is not None else 2 * p + 2

    def data_degree(self, p: int) -> int:
        return self.data_quad_degree if self.data_quad_degree is not None else 2 * p + 6


@dataclass(frozen=True)
class FacePenalties:
    sigma0: float
    sigma1: float
    sigma2: float


def penalties(mesh: SpatialMesh, face_index: int, p: int, tau: float,
              cfg: PenaltyConfig) -> FacePenalties:
    """Per-face stabilisation weights for one slab of length tau."""
    h_e = mesh.faces[face_index].h_e
    if h_e <= 0 or tau <= 0:
        raise ValueError("face size and slab length must be positive")
    c_a = mesh.a_max
    sigma0 = cfg.c_sigma0 * p * p / h_e
    sigma1 = c_a * p**3 / (h_e * tau) if cfg.sigma1_enabled else 0.0
    sigma2 = h_e / (c_a * tau) if cfg.sigma2_enabled else 0.0
    return FacePenalties(sigma0, sigma1, sigma2)


# -- evaluation bundles ----------------------------------------------------


class _Tables:
    """Coefficient matrices of a basis and its derivatives (local frame)."""

    def __init__(self, basis: LocalBasis):
        exps = basis.exps
        d = basis.dim
        c = basis.coeff_matrix
        d_t = diff_matrix(exps, d)
        d_x = [diff_matrix(exps, j) for j in range(d)]
        s_x, s_t = basis.frame.s_x, basis.frame.s_t
        self.exps = exps
        self.a = basis.coefficient
        self.val = c
        self.dt = (d_t @ c) / s_t
        self.dtt = (d_t @ (d_t @ c)) / s_t**2
        self.grad = [(dj @ c) / s_x for dj in d_x]
        self.grad_dt = [(dj @ (d_t @ c)) / (s_x * s_t) for dj in d_x]


class _Eval:
    """Basis values and derivatives at a fixed set of local points."""

    def __init__(self, tables: _Tables, pts_local: np.ndarray):
        v = vandermonde(tables.exps, pts_local)
        self.val = v @ tables.val
        self.dt = v @ tables.dt
        self.dtt = v @ tables.dtt
        self.grad = [v @ g for g in tables.grad]
        self.grad_dt = [v @ g for g in tables.grad_dt]

    def flux(self, a: float, normal: np.ndarray) -> np.ndarray:
        out = a * normal[0] * self.grad[0]
        for j in range(1, len(self.grad)):
            out = out + a * normal[j] * self.grad[j]
        return out

    def flux_dt(self, a: float, normal: np.ndarray) -> np.ndarray:
        out = a * normal[0] * self.grad_dt[0]
        for j in range(1, len(self.grad_dt)):
            out = out + a * normal[j] * self.grad_dt[j]
        return out


@dataclass
class FaceClass:
    """Faces sharing incident groups, local geometry, normal and size."""

    faces: np.ndarray
    elems: Tuple[np.ndarray, ...]          # per side, element index arrays
    groups: Tuple[int, ...]
    loc_verts: Tuple[np.ndarray, ...]      # face corners in side-local coords
    normal: np.ndarray
    boundary: bool
    h_e: float
    measure: float
    sigma0: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0

    @property
    def n_sides(self) -> int:
        return len(self.elems)

    @property
    def signs(self) -> Tuple[float, ...]:
        return (1.0,) if self.boundary else (1.0, -1.0)

    @property
    def avg_weights(self) -> Tuple[float, ...]:
        return (1.0,) if self.boundary else (0.5, 0.5)


@dataclass
class KnotState:
    """Traces of a space-time function at one time level.

    Element data per group: time derivative and spatial gradient at the
    group's spatial quadrature points.  Face data per class: normal-dotted
    value jump and average normal flux.
    """

    elems: List[dict]
    faces: List[dict]

    def __sub__(self, other: "KnotState") -> "KnotState":
        elems = []
        for a, b in zip(self.elems, other.elems):
            elems.append({"w": a["w"], "a": a["a"], "ut": a["ut"] - b["ut"],
                          "grad": a["grad"] - b["grad"]})
        faces = []
        for a, b in zip(self.faces, other.faces):
            faces.append({"w": a["w"], "sigma0": a["sigma0"],
                          "jump": a["jump"] - b["jump"],
                          "avgflux": a["avgflux"] - b["avgflux"]})
        return KnotState(elems, faces)


@dataclass
class FaceTimeState:
    """Face-time traces over one slab, per face class."""

    classes: List[dict]

    def __sub__(self, other: "FaceTimeState") -> "FaceTimeState":
        out = []
        for a, b in zip(self.classes, other.classes):
            merged = {k: a[k] for k in ("w", "sigma0", "sigma1", "sigma2", "boundary")}
            for k in ("jump", "jumpflux", "avg_dt", "avgflux_dt", "jump_dt"):
                if k in a and a[k] is not None and k in b and b[k] is not None:
                    merged[k] = a[k] - b[k]
                elif k in a:
                    merged[k] = a[k]
            out.append(merged)
        return FaceTimeState(out)


@dataclass
class SlabTraceData:
    """Quadrature-point traces of a slab solution at its final time.

    Decouples right-hand-side assembly from the representation of the
    previous slab: per group, time derivative and gradient values; per
    face class, value jumps and average fluxes.
    """

    elems: List[dict]
    faces: List[dict]


class SlabAssembler:
    """All slab-local machinery for one space: matrices, traces, norms."""

    def __init__(self, space: SlabSpace, cfg: PenaltyConfig):
        self.space = space
        self.cfg = cfg
        self.mesh = space.mesh
        self.d = space.d
        self.p = space.p
        self.nf = space.n_funcs
        self.s_t = space.s_t
        self.tables = [_Tables(g.basis) for g in space.groups]
        self.classes = self._build_face_classes()
        self._rule_cache: Dict[tuple, tuple] = {}
        self._eval_cache: Dict[tuple, object] = {}
        self._matrix = None
        self._matrix_skeleton = None
        self._coupling = None

    # -- face classes ------------------------------------------------

    def _build_face_classes(self) -> List[FaceClass]:
        mesh, space = self.mesh, self.space
        buckets: Dict[tuple, list] = {}
        for fi, face in enumerate(mesh.faces):
            loc_verts = []
            side_keys = []
            for e in face.elems:
                lv = (mesh.vertices[list(face.vertices)] - space.centers[e]) / space.s_x[e]
                loc_verts.append(lv)
                side_keys.append((int(space.elem_group[e]), tuple(map(tuple, np.round(lv, _ROUND)))))
            key = (
                tuple(side_keys),
                tuple(np.round(face.normal, _ROUND)),
                round(face.h_e, _ROUND),
                round(face.measure, _ROUND),
                face.boundary,
            )
            buckets.setdefault(key, []).append((fi, face, loc_verts))
        classes = []
        for key in sorted(buckets, key=repr):
            entries = buckets[key]
            fi0, face0, loc0 = entries[0]
            faces = np.array([fi for fi, _, _ in entries], dtype=int)
            elems = tuple(
                np.array([f.elems[s] for _, f, _ in entries], dtype=int)
                for s in range(len(face0.elems))
            )
            pen = penalties(mesh, fi0, self.p, self.space.tau, self.cfg)
            classes.append(
                FaceClass(
                    faces=faces,
                    elems=elems,
                    groups=tuple(int(space.elem_group[e]) for e in face0.elems),
                    loc_verts=tuple(loc0),
                    normal=face0.normal,
                    boundary=face0.boundary,
                    h_e=face0.h_e,
                    measure=face0.measure,
                    sigma0=pen.sigma0,
                    sigma1=pen.sigma1,
                    sigma2=pen.sigma2,
                )
            )
        return classes

    # -- local rules ---------------------------------------------------

    def _time_nodes(self, degree: int) -> Tuple[np.ndarray, np.ndarray]:
        key = ("time", degree)
        if key not in self._rule_cache:
            x, w = gauss_legendre_01(degree // 2 + 1)
            self._rule_cache[key] = (2.0 * x - 1.0, w * self.space.tau)
        return self._rule_cache[key]

    def _group_spatial_rule(self, g: int, degree: int) -> Tuple[np.ndarray, np.ndarray]:
        """Local spatial nodes and physical weights on group g's element."""
        key = ("gspat", g, degree)
        if key not in self._rule_cache:
            group = self.space.groups[g]
            if self.d == 1:
                x, w = gauss_legendre_01(degree // 2 + 1)
                pts = (2.0 * x - 1.0)[:, None]
                wts = 2.0 * w * group.s_x
            else:
                pts, wts = triangle_rule(group.local_vertices, degree)
                wts = wts * group.s_x**2
            self._rule_cache[key] = (pts, wts)
        return self._rule_cache[key]

    def _class_spatial_rule(self, ci: int, degree: int) -> Tuple[list, np.ndarray, np.ndarray]:
        """Per-side local face nodes, shared parameters and physical weights."""
        key = ("cspat", ci, degree)
        if key not in self._rule_cache:
            cls = self.classes[ci]
            if self.d == 1:
                params = np.zeros(1)
                wts = np.array([cls.measure])
                pts = [lv.reshape(1, 1) for lv in cls.loc_verts]
            else:
                s, w = gauss_legendre_01(degree // 2 + 1)
                params = s
                wts = w * cls.measure
                pts = [lv[0][None, :] + s[:, None] * (lv[1] - lv[0])[None, :]
                       for lv in cls.loc_verts]
            self._rule_cache[key] = (pts, params, wts)
        return self._rule_cache[key]

    @staticmethod
    def _tensor(pts_x: np.ndarray, t_nodes: np.ndarray) -> np.ndarray:
        nx, nt = pts_x.shape[0], t_nodes.shape[0]
        out = np.empty((nx * nt, pts_x.shape[1] + 1))
        out[:, :-1] = np.repeat(pts_x, nt, axis=0)
        out[:, -1] = np.tile(t_nodes, nx)
        return out

    @staticmethod
    def _at_time(pts_x: np.ndarray, t_loc: float) -> np.ndarray:
        out = np.empty((pts_x.shape[0], pts_x.shape[1] + 1))
        out[:, :-1] = pts_x
        out[:, -1] = t_loc
        return out

    # -- cached evaluations --------------------------------------------

    def _group_eval(self, g: int, kind: str, degree: int, t_loc: float | None = None) -> _Eval:
        key = ("gev", g, kind, degree, t_loc)
        if key not in self._eval_cache:
            px, _ = self._group_spatial_rule(g, degree)
            if kind == "volume":
                tn, _ = self._time_nodes(degree)
                pts = self._tensor(px, tn)
            else:
                pts = self._at_time(px, t_loc)
            self._eval_cache[key] = _Eval(self.tables[g], pts)
        return self._eval_cache[key]

    def _face_eval(self, ci: int, side: int, kind: str, degree: int,
                   t_loc: float | None = None) -> _Eval:
        key = ("fev", ci, side, kind, degree, t_loc)
        if key not in self._eval_cache:
            pts_sides, _, _ = self._class_spatial_rule(ci, degree)
            g = self.classes[ci].groups[side]
            if kind == "time":
                tn, _ = self._time_nodes(degree)
                pts = self._tensor(pts_sides[side], tn)
            else:
                pts = self._at_time(pts_sides[side], t_loc)
            self._eval_cache[key] = _Eval(self.tables[g], pts)
        return self._eval_cache[key]

    def _face_weights(self, ci: int, kind: str, degree: int) -> np.ndarray:
        _, _, wx = self._class_spatial_rule(ci, degree)
        if kind == "trace":
            return wx
        _, wt = self._time_nodes(degree)
        return np.repeat(wx, wt.shape[0]) * np.tile(wt, wx.shape[0])

    def _group_weights(self, g: int, kind: str, degree: int) -> np.ndarray:
        _, wx = self._group_spatial_rule(g, degree)
        if kind == "trace":
            return wx
        _, wt = self._time_nodes(degree)
        return np.repeat(wx, wt.shape[0]) * np.tile(wt, wx.shape[0])

    # -- matrix assembly -------------------------------------------------

    def _scatter(self, rows, cols, data, block: np.ndarray,
                 elems_a: np.ndarray, elems_b: np.ndarray):
        nf = self.nf
        offs = self.space.offsets
        r = offs[elems_a][:, None, None] + np.arange(nf)[None, :, None]
        c = offs[elems_b][:, None, None] + np.arange(nf)[None, None, :]
        r = np.broadcast_to(r, (elems_a.size, nf, nf))
        c = np.broadcast_to(c, (elems_b.size, nf, nf))
        d = np.broadcast_to(block[None, :, :], (elems_a.size, nf, nf))
        rows.append(r.ravel())
        cols.append(c.ravel())
        data.append(d.ravel())

    def _finalize(self, rows, cols, data) -> sp.csr_matrix:
        n = self.space.n_dof
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        return mat.tocsr()

    def matrix(self) -> sp.csr_matrix:
        """Slab matrix A[i, j] = form(trial_j, test_i), volume-form path."""
        if self._matrix is not None:
            return self._matrix
        deg = self.cfg.assembly_degree(self.p)
        rows, cols, data = [], [], []
        for g, group in enumerate(self.space.groups):
            a = group.a
            ev = self._group_eval(g, "volume", deg)
            w = self._group_weights(g, "volume", deg)
            block = ev.dt.T @ (w[:, None] * ev.dtt)
            for j in range(self.d):
                block += a * ev.grad_dt[j].T @ (w[:, None] * ev.grad[j])
            evb = self._group_eval(g, "trace", deg, t_loc=-1.0)
            wx = self._group_weights(g, "trace", deg)
            block += evb.dt.T @ (wx[:, None] * evb.dt)
            for j in range(self.d):
                block += a * evb.grad[j].T @ (wx[:, None] * evb.grad[j])
            self._scatter(rows, cols, data, block, group.members, group.members)
        for ci, cls in enumerate(self.classes):
            w = self._face_weights(ci, "time", deg)
            wx = self._face_weights(ci, "trace", deg)
            evs = [self._face_eval(ci, s, "time", deg) for s in range(cls.n_sides)]
            evb = [self._face_eval(ci, s, "trace", deg, t_loc=-1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            fl = [evs[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            flt = [evs[s].flux_dt(a_of[s], cls.normal) for s in range(cls.n_sides)]
            flb = [evb[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            sg, aw = cls.signs, cls.avg_weights
            for ia in range(cls.n_sides):
                for ib in range(cls.n_sides):
                    blk = -(sg[ia] * evs[ia].dt).T @ (w[:, None] * (aw[ib] * fl[ib]))
                    blk += -(aw[ia] * flt[ia]).T @ (w[:, None] * (sg[ib] * evs[ib].val))
                    blk += cls.sigma0 * (sg[ia] * evs[ia].dt).T @ (w[:, None] * (sg[ib] * evs[ib].val))
                    blk += cls.sigma1 * (sg[ia] * evs[ia].val).T @ (w[:, None] * (sg[ib] * evs[ib].val))
                    if not cls.boundary and cls.sigma2:
                        blk += cls.sigma2 * (sg[ia] * fl[ia]).T @ (w[:, None] * (sg[ib] * fl[ib]))
                    blk += -(sg[ia] * evb[ia].val).T @ (wx[:, None] * (aw[ib] * flb[ib]))
                    blk += -(aw[ia] * flb[ia]).T @ (wx[:, None] * (sg[ib] * evb[ib].val))
                    blk += cls.sigma0 * (sg[ia] * evb[ia].val).T @ (wx[:, None] * (sg[ib] * evb[ib].val))
                    self._scatter(rows, cols, data, blk, cls.elems[ia], cls.elems[ib])
        self._matrix = self._finalize(rows, cols, data)
        return self._matrix

    def matrix_skeleton(self) -> sp.csr_matrix:
        """Slab matrix via the integrated-by-parts form: no space-time
        volume integrals; valid only on Trefftz spaces."""
        if self.space.kind != "trefftz":
            raise ValueError("the skeleton form requires a Trefftz space")
        if self._matrix_skeleton is not None:
            return self._matrix_skeleton
        deg = self.cfg.assembly_degree(self.p)
        rows, cols, data = [], [], []
        for g, group in enumerate(self.space.groups):
            a = group.a
            evt = self._group_eval(g, "trace", deg, t_loc=1.0)
            wx = self._group_weights(g, "trace", deg)
            block = evt.dt.T @ (wx[:, None] * evt.dt)
            for j in range(self.d):
                block += a * evt.grad[j].T @ (wx[:, None] * evt.grad[j])
            self._scatter(rows, cols, data, block, group.members, group.members)
        for ci, cls in enumerate(self.classes):
            w = self._face_weights(ci, "time", deg)
            wx = self._face_weights(ci, "trace", deg)
            evs = [self._face_eval(ci, s, "time", deg) for s in range(cls.n_sides)]
            evt = [self._face_eval(ci, s, "trace", deg, t_loc=1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            fl = [evs[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            flt = [evs[s].flux_dt(a_of[s], cls.normal) for s in range(cls.n_sides)]
            fltop = [evt[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            sg, aw = cls.signs, cls.avg_weights
            for ia in range(cls.n_sides):
                for ib in range(cls.n_sides):
                    blk = (sg[ia] * evs[ia].val).T @ (w[:, None] * (aw[ib] * flt[ib]))
                    blk += -cls.sigma0 * (sg[ia] * evs[ia].val).T @ (w[:, None] * (sg[ib] * evs[ib].dt))
                    blk += cls.sigma1 * (sg[ia] * evs[ia].val).T @ (w[:, None] * (sg[ib] * evs[ib].val))
                    if not cls.boundary:
                        blk += -(sg[ia] * fl[ia]).T @ (w[:, None] * (aw[ib] * evs[ib].dt))
                        if cls.sigma2:
                            blk += cls.sigma2 * (sg[ia] * fl[ia]).T @ (w[:, None] * (sg[ib] * fl[ib]))
                    blk += -(sg[ia] * evt[ia].val).T @ (wx[:, None] * (aw[ib] * fltop[ib]))
                    blk += cls.sigma0 * (sg[ia] * evt[ia].val).T @ (wx[:, None] * (sg[ib] * evt[ib].val))
                    blk += -(aw[ia] * fltop[ia]).T @ (wx[:, None] * (sg[ib] * evt[ib].val))
                    self._scatter(rows, cols, data, blk, cls.elems[ia], cls.elems[ib])
        self._matrix_skeleton = self._finalize(rows, cols, data)
        return self._matrix_skeleton

    def coupling_matrix(self) -> sp.csr_matrix:
        """Matrix B with rhs_n = B @ coeffs_{n-1}: couples the previous
        slab's final traces to the current slab's initial test traces."""
        if self._coupling is not None:
            return self._coupling
        deg = self.cfg.assembly_degree(self.p)
        rows, cols, data = [], [], []
        for g, group in enumerate(self.space.groups):
            a = group.a
            evb = self._group_eval(g, "trace", deg, t_loc=-1.0)
            evt = self._group_eval(g, "trace", deg, t_loc=1.0)
            wx = self._group_weights(g, "trace", deg)
            block = evb.dt.T @ (wx[:, None] * evt.dt)
            for j in range(self.d):
                block += a * evb.grad[j].T @ (wx[:, None] * evt.grad[j])
            self._scatter(rows, cols, data, block, group.members, group.members)
        for ci, cls in enumerate(self.classes):
            wx = self._face_weights(ci, "trace", deg)
            evb = [self._face_eval(ci, s, "trace", deg, t_loc=-1.0) for s in range(cls.n_sides)]
            evt = [self._face_eval(ci, s, "trace", deg, t_loc=1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            flb = [evb[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            flt = [evt[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            sg, aw = cls.signs, cls.avg_weights
            for ia in range(cls.n_sides):
                for ib in range(cls.n_sides):
                    blk = -(sg[ia] * evb[ia].val).T @ (wx[:, None] * (aw[ib] * flt[ib]))
                    blk += -(aw[ia] * flb[ia]).T @ (wx[:, None] * (sg[ib] * evt[ib].val))
                    blk += cls.sigma0 * (sg[ia] * evb[ia].val).T @ (wx[:, None] * (sg[ib] * evt[ib].val))
                    self._scatter(rows, cols, data, blk, cls.elems[ia], cls.elems[ib])
        self._coupling = self._finalize(rows, cols, data)
        return self._coupling

    # -- data for right-hand sides ---------------------------------------

    def _group_phys_x(self, g: int, degree: int) -> np.ndarray:
        """Physical spatial points of the group rule, per member element."""
        key = ("gphys", g, degree)
        if key not in self._rule_cache:
            group = self.space.groups[g]
            px, _ = self._group_spatial_rule(g, degree)
            centers = self.space.centers[group.members]
            self._rule_cache[key] = (
                px[None, :, :] * group.s_x + centers[:, None, :]
            )
        return self._rule_cache[key]

    def _class_phys_x(self, ci: int, degree: int) -> np.ndarray:
        """Physical spatial points of the face rule, per member face."""
        key = ("cphys", ci, degree)
        if key not in self._rule_cache:
            cls = self.classes[ci]
            _, params, _ = self._class_spatial_rule(ci, degree)
            mesh = self.mesh
            pts = []
            for fi in cls.faces:
                verts = mesh.vertices[list(mesh.faces[fi].vertices)]
                if self.d == 1:
                    pts.append(verts.reshape(1, 1))
                else:
                    pts.append(verts[0][None, :] + params[:, None] * (verts[1] - verts[0])[None, :])
            self._rule_cache[key] = np.array(pts)
        return self._rule_cache[key]

    def initial_vector(self, u0: Callable, grad_u0: Callable, v0: Callable) -> np.ndarray:
        """Right-hand side of the first slab from initial displacement and
        velocity; jump terms vanish identically for continuous data."""
        deg = self.cfg.data_degree(self.p)
        rhs = np.zeros(self.space.n_dof)
        view = rhs.reshape(self.mesh.n_elems, self.nf)
        for g, group in enumerate(self.space.groups):
            a = group.a
            evb = self._group_eval(g, "trace", deg, t_loc=-1.0)
            wx = self._group_weights(g, "trace", deg)
            phys = self._group_phys_x(g, deg)          # (E, nq, d)
            flat = phys.reshape(-1, self.d)
            v0_vals = np.asarray(v0(flat), dtype=float).reshape(phys.shape[:2])
            g0_vals = np.asarray(grad_u0(flat), dtype=float).reshape(phys.shape[0], phys.shape[1], self.d)
            view[group.members] += (wx[None, :] * v0_vals) @ evb.dt
            for j in range(self.d):
                view[group.members] += a * (wx[None, :] * g0_vals[:, :, j]) @ evb.grad[j]
        for ci, cls in enumerate(self.classes):
            wx = self._face_weights(ci, "trace", deg)
            evb = [self._face_eval(ci, s, "trace", deg, t_loc=-1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            flb = [evb[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            phys = self._class_phys_x(ci, deg)         # (F, nq, d)
            flat = phys.reshape(-1, self.d)
            g0 = np.asarray(grad_u0(flat), dtype=float).reshape(phys.shape[0], phys.shape[1], self.d)
            avgflux0 = (g0 @ cls.normal) * sum(w * a for w, a in zip(cls.avg_weights, a_of))
            jump0 = None
            if cls.boundary:
                jump0 = np.asarray(u0(flat), dtype=float).reshape(phys.shape[:2])
            sg, aw = cls.signs, cls.avg_weights
            for ia in range(cls.n_sides):
                view[cls.elems[ia]] += -(wx[None, :] * avgflux0) @ (sg[ia] * evb[ia].val)
                if jump0 is not None:
                    view[cls.elems[ia]] += -(wx[None, :] * jump0) @ (aw[ia] * flb[ia])
                    view[cls.elems[ia]] += cls.sigma0 * (wx[None, :] * jump0) @ (sg[ia] * evb[ia].val)
        return rhs

    def trace_data(self, coeffs: np.ndarray) -> SlabTraceData:
        """Final-time traces of a slab solution, as quadrature-point data."""
        deg = self.cfg.assembly_degree(self.p)
        cview = coeffs.reshape(self.mesh.n_elems, self.nf)
        elems = []
        for g, group in enumerate(self.space.groups):
            evt = self._group_eval(g, "trace", deg, t_loc=1.0)
            c = cview[group.members]
            elems.append({
                "ut": c @ evt.dt.T,
                "grad": np.stack([c @ gj.T for gj in evt.grad], axis=-1),
            })
        faces = []
        for ci, cls in enumerate(self.classes):
            evt = [self._face_eval(ci, s, "trace", deg, t_loc=1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            vals = [cview[cls.elems[s]] @ evt[s].val.T for s in range(cls.n_sides)]
            fluxes = [cview[cls.elems[s]] @ evt[s].flux(a_of[s], cls.normal).T
                      for s in range(cls.n_sides)]
            if cls.boundary:
                jump, avgflux = vals[0], fluxes[0]
            else:
                jump = vals[0] - vals[1]
                avgflux = 0.5 * (fluxes[0] + fluxes[1])
            faces.append({"jump": jump, "avgflux": avgflux})
        return SlabTraceData(elems, faces)

    def rhs_from_trace_data(self, td: SlabTraceData) -> np.ndarray:
        """Right-hand side of a slab from the previous slab's trace data."""
        deg = self.cfg.assembly_degree(self.p)
        rhs = np.zeros(self.space.n_dof)
        view = rhs.reshape(self.mesh.n_elems, self.nf)
        for g, group in enumerate(self.space.groups):
            a = group.a
            evb = self._group_eval(g, "trace", deg, t_loc=-1.0)
            wx = self._group_weights(g, "trace", deg)
            data = td.elems[g]
            view[group.members] += (wx[None, :] * data["ut"]) @ evb.dt
            for j in range(self.d):
                view[group.members] += a * (wx[None, :] * data["grad"][:, :, j]) @ evb.grad[j]
        for ci, cls in enumerate(self.classes):
            wx = self._face_weights(ci, "trace", deg)
            evb = [self._face_eval(ci, s, "trace", deg, t_loc=-1.0) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            flb = [evb[s].flux(a_of[s], cls.normal) for s in range(cls.n_sides)]
            jump, avgflux = td.faces[ci]["jump"], td.faces[ci]["avgflux"]
            sg, aw = cls.signs, cls.avg_weights
            for ia in range(cls.n_sides):
                view[cls.elems[ia]] += -(wx[None, :] * avgflux) @ (sg[ia] * evb[ia].val)
                view[cls.elems[ia]] += -(wx[None, :] * jump) @ (aw[ia] * flb[ia])
                view[cls.elems[ia]] += cls.sigma0 * (wx[None, :] * jump) @ (sg[ia] * evb[ia].val)
        return rhs

    # -- trace states ------------------------------------------------------

    def knot_state_discrete(self, coeffs: np.ndarray, t_loc: float,
                            degree: int | None = None) -> KnotState:
        """Traces of the slab function at local time t_loc in [-1, 1]."""
        if not -1.0 - 1e-12 <= t_loc <= 1.0 + 1e-12:
            raise ValueError(f"local time {t_loc} outside the slab")
        deg = degree if degree is not None else self.cfg.assembly_degree(self.p)
        cview = coeffs.reshape(self.mesh.n_elems, self.nf)
        elems = []
        for g, group in enumerate(self.space.groups):
            ev = self._group_eval(g, "trace", deg, t_loc=t_loc)
            wx = self._group_weights(g, "trace", deg)
            c = cview[group.members]
            elems.append({
                "w": wx, "a": group.a,
                "ut": c @ ev.dt.T,
                "grad": np.stack([c @ gj.T for gj in ev.grad], axis=-1),
            })
        faces = []
        for ci, cls in enumerate(self.classes):
            ev = [self._face_eval(ci, s, "trace", deg, t_loc=t_loc) for s in range(cls.n_sides)]
            wx = self._face_weights(ci, "trace", deg)
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            vals = [cview[cls.elems[s]] @ ev[s].val.T for s in range(cls.n_sides)]
            fluxes = [cview[cls.elems[s]] @ ev[s].flux(a_of[s], cls.normal).T
                      for s in range(cls.n_sides)]
            if cls.boundary:
                jump, avgflux = vals[0], fluxes[0]
            else:
                jump = vals[0] - vals[1]
                avgflux = 0.5 * (fluxes[0] + fluxes[1])
            faces.append({"w": wx, "sigma0": cls.sigma0, "jump": jump, "avgflux": avgflux})
        return KnotState(elems, faces)

    def knot_state_exact(self, exact, t_phys: float, degree: int | None = None) -> KnotState:
        """Traces of a globally smooth function at physical time t_phys."""
        deg = degree if degree is not None else self.cfg.data_degree(self.p)
        elems = []
        for g, group in enumerate(self.space.groups):
            wx = self._group_weights(g, "trace", deg)
            phys = self._group_phys_x(g, deg)
            flat = self._with_time(phys, t_phys)
            ut = np.asarray(exact.ut(flat)).reshape(phys.shape[:2])
            grad = np.asarray(exact.grad(flat)).reshape(phys.shape[0], phys.shape[1], self.d)
            elems.append({"w": wx, "a": group.a, "ut": ut, "grad": grad})
        faces = []
        for ci, cls in enumerate(self.classes):
            wx = self._face_weights(ci, "trace", deg)
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            phys = self._class_phys_x(ci, deg)
            flat = self._with_time(phys, t_phys)
            grad = np.asarray(exact.grad(flat)).reshape(phys.shape[0], phys.shape[1], self.d)
            avgflux = (grad @ cls.normal) * sum(w * a for w, a in zip(cls.avg_weights, a_of))
            if cls.boundary:
                jump = np.asarray(exact.u(flat)).reshape(phys.shape[:2])
            else:
                jump = np.zeros(phys.shape[:2])
            faces.append({"w": wx, "sigma0": cls.sigma0, "jump": jump, "avgflux": avgflux})
        return KnotState(elems, faces)

    @staticmethod
    def _with_time(phys_x: np.ndarray, t: float) -> np.ndarray:
        flat = phys_x.reshape(-1, phys_x.shape[-1])
        return np.column_stack([flat, np.full(flat.shape[0], t)])

    def energy(self, state: KnotState) -> float:
        """Discrete energy of a trace state: kinetic and elastic halves,
        the sigma_0 jump penalty and the flux-consistency correction."""
        total = 0.0
        for eg in state.elems:
            total += 0.5 * float(np.sum(eg["w"] * eg["ut"] ** 2))
            total += 0.5 * eg["a"] * float(np.einsum("q,fqd->", eg["w"], eg["grad"] ** 2))
        for fc in state.faces:
            total += 0.5 * fc["sigma0"] * float(np.sum(fc["w"] * fc["jump"] ** 2))
            total -= float(np.sum(fc["w"] * fc["avgflux"] * fc["jump"]))
        return total

    def physical_energy(self, state: KnotState) -> float:
        """Kinetic plus elastic energy, no penalty or consistency terms."""
        total = 0.0
        for eg in state.elems:
            total += 0.5 * float(np.sum(eg["w"] * eg["ut"] ** 2))
            total += 0.5 * eg["a"] * float(np.einsum("q,fqd->", eg["w"], eg["grad"] ** 2))
        return total

    # -- face-time states over one slab -------------------------------------

    def face_time_state_discrete(self, coeffs: np.ndarray, degree: int | None = None,
                                 extended: bool = False) -> FaceTimeState:
        deg = degree if degree is not None else self.cfg.assembly_degree(self.p)
        cview = coeffs.reshape(self.mesh.n_elems, self.nf)
        out = []
        for ci, cls in enumerate(self.classes):
            w = self._face_weights(ci, "time", deg)
            evs = [self._face_eval(ci, s, "time", deg) for s in range(cls.n_sides)]
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            vals = [cview[cls.elems[s]] @ evs[s].val.T for s in range(cls.n_sides)]
            entry = {"w": w, "sigma0": cls.sigma0, "sigma1": cls.sigma1,
                     "sigma2": cls.sigma2, "boundary": cls.boundary}
            if cls.boundary:
                entry["jump"] = vals[0]
                entry["jumpflux"] = None
            else:
                entry["jump"] = vals[0] - vals[1]
                fluxes = [cview[cls.elems[s]] @ evs[s].flux(a_of[s], cls.normal).T
                          for s in range(cls.n_sides)]
                entry["jumpflux"] = fluxes[0] - fluxes[1]
            if extended:
                dts = [cview[cls.elems[s]] @ evs[s].dt.T for s in range(cls.n_sides)]
                fluxdt = [cview[cls.elems[s]] @ evs[s].flux_dt(a_of[s], cls.normal).T
                          for s in range(cls.n_sides)]
                if cls.boundary:
                    entry["avg_dt"] = None
                    entry["avgflux_dt"] = fluxdt[0]
                    entry["jump_dt"] = dts[0]
                else:
                    entry["avg_dt"] = 0.5 * (dts[0] + dts[1])
                    entry["avgflux_dt"] = 0.5 * (fluxdt[0] + fluxdt[1])
                    entry["jump_dt"] = dts[0] - dts[1]
            out.append(entry)
        return FaceTimeState(out)

    def face_time_state_exact(self, exact, t_mid: float, degree: int | None = None,
                              extended: bool = False) -> FaceTimeState:
        deg = degree if degree is not None else self.cfg.data_degree(self.p)
        tn, _ = self._time_nodes(deg)
        out = []
        for ci, cls in enumerate(self.classes):
            w = self._face_weights(ci, "time", deg)
            a_of = [self.space.groups[cls.groups[s]].a for s in range(cls.n_sides)]
            phys_x = self._class_phys_x(ci, deg)       # (F, nqx, d)
            nf_, nqx = phys_x.shape[0], phys_x.shape[1]
            nqt = tn.shape[0]
            pts = np.empty((nf_, nqx, nqt, self.d + 1))
            pts[..., : self.d] = phys_x[:, :, None, :]
            pts[..., self.d] = t_mid + self.s_t * tn[None, None, :]
            flat = pts.reshape(-1, self.d + 1)
            entry = {"w": w, "sigma0": cls.sigma0, "sigma1": cls.sigma1,
                     "sigma2": cls.sigma2, "boundary": cls.boundary}
            shape = (nf_, nqx * nqt)
            if cls.boundary:
                entry["jump"] = np.asarray(exact.u(flat)).reshape(shape)
                entry["jumpflux"] = None
            else:
                entry["jump"] = np.zeros(shape)
                if a_of[0] != a_of[1]:
                    grad = np.asarray(exact.grad(flat)).reshape(nf_, nqx * nqt, self.d)
                    entry["jumpflux"] = (a_of[0] - a_of[1]) * (grad @ cls.normal)
                else:
                    entry["jumpflux"] = np.zeros(shape)
            if extended:
                ut = np.asarray(exact.ut(flat)).reshape(shape)
                grad_t = np.asarray(exact.grad_t(flat)).reshape(nf_, nqx * nqt, self.d)
                fluxdt_single = grad_t @ cls.normal
                if cls.boundary:
                    entry["avg_dt"] = None
                    entry["avgflux_dt"] = a_of[0] * fluxdt_single
                    entry["jump_dt"] = ut
                else:
                    entry["avg_dt"] = ut
                    entry["avgflux_dt"] = 0.5 * (a_of[0] + a_of[1]) * fluxdt_single
                    entry["jump_dt"] = np.zeros(shape)
            out.append(entry)
        return FaceTimeState(out)

    def sigma_face_terms(self, state: FaceTimeState) -> Tuple[float, float]:
        """The two optional penalty accumulations over one slab."""
        s1 = s2 = 0.0
        for cl in state.classes:
            s1 += cl["sigma1"] * float(np.sum(cl["w"] * cl["jump"] ** 2))
            if not cl["boundary"] and cl["jumpflux"] is not None:
                s2 += cl["sigma2"] * float(np.sum(cl["w"] * cl["jumpflux"] ** 2))
        return s1, s2

    def dgstar_face_terms(self, state: FaceTimeState) -> float:
        """Slab contribution of the continuity-side norm's face terms."""
        total = 0.0
        for cl in state.classes:
            s0, s1, s2 = cl["sigma0"], cl["sigma1"], cl["sigma2"]
            if s1 <= 0 or s2 <= 0:
                raise ValueError("the continuity-side norm needs sigma1, sigma2 > 0")
            w = cl["w"]
            total += s1 * float(np.sum(w * cl["jump"] ** 2))
            total += (1.0 / s1) * float(np.sum(w * cl["avgflux_dt"] ** 2))
            total += (s0**2 / s1) * float(np.sum(w * cl["jump_dt"] ** 2))
            if not cl["boundary"]:
                total += s2 * float(np.sum(w * cl["jumpflux"] ** 2))
                total += (1.0 / s2) * float(np.sum(w * cl["avg_dt"] ** 2))
        return total

    def dgstar_knot_terms(self, state: KnotState) -> float:
        """Knot contribution (one time level) of the continuity-side norm."""
        total = 0.0
        for eg in state.elems:
            total += 0.5 * float(np.sum(eg["w"] * eg["ut"] ** 2))
            total += 0.5 * eg["a"] * float(np.einsum("q,fqd->", eg["w"], eg["grad"] ** 2))
        for fc in state.faces:
            total += 0.5 * fc["sigma0"] * float(np.sum(fc["w"] * fc["jump"] ** 2))
            total += 0.5 / fc["sigma0"] * float(np.sum(fc["w"] * fc["avgflux"] ** 2))
        return total


# -- spec-level convenience wrappers --------------------------------------


def assemble_slab_matrix(space: SlabSpace, cfg: PenaltyConfig) -> sp.csr_matrix:
    return SlabAssembler(space, cfg).matrix()


def assemble_slab_matrix_skeleton(space: SlabSpace, cfg: PenaltyConfig) -> sp.csr_matrix:
    return SlabAssembler(space, cfg).matrix_skeleton()


def assemble_coupling_rhs(assembler: SlabAssembler, prev_coeffs: np.ndarray) -> np.ndarray:
    """Right-hand side for a slab given the previous slab's coefficients,
    carried through evaluated trace data."""
    return assembler.rhs_from_trace_data(assembler.trace_data(prev_coeffs))


def assemble_initial_rhs(assembler: SlabAssembler, u0, grad_u0, v0) -> np.ndarray:
    return assembler.initial_vector(u0, grad_u0, v0)
