"""Per-slab discrete spaces: element frames, local bases, DOF numbering.

All slabs of a uniform time partition share one SlabSpace: local bases are
expressed in element frames whose temporal center is the slab midpoint, so
nothing in the local data depends on the slab index.  Elements are grouped
by congruence (identical local geometry, coefficient and basis); assembly
and evaluation compute per-group data once and reuse it for every member.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .basis import ElementFrame, LocalBasis, build_basis, full_dim, trefftz_dim, KIND_TREFFTZ, KIND_FULL
from .meshing import SpatialMesh

_ROUND = 12


@dataclass
class ElementGroup:
    """Congruence class of elements sharing one local basis."""

    basis: LocalBasis
    members: np.ndarray            # element indices
    local_vertices: np.ndarray     # (n_vertices, d), shared by all members
    a: float
    s_x: float


class SlabSpace:
    """Discrete space on one time slab of length tau over a fixed mesh."""

    def __init__(self, mesh: SpatialMesh, p: int, kind: str, tau: float):
        if p < 0:
            raise ValueError(f"degree must be nonnegative, got {p}")
        if tau <= 0:
            raise ValueError(f"slab length must be positive, got {tau}")
        if kind not in (KIND_TREFFTZ, KIND_FULL):
            raise ValueError(f"unknown space kind {kind!r}")
        self.mesh = mesh
        self.d = mesh.dim
        self.p = p
        self.kind = kind
        self.tau = float(tau)
        self.s_t = 0.5 * self.tau

        self.n_funcs = trefftz_dim(p, self.d) if kind == KIND_TREFFTZ else full_dim(p, self.d)
        self.n_dof = self.n_funcs * mesh.n_elems
        self.offsets = self.n_funcs * np.arange(mesh.n_elems + 1)

        self.centers = np.array([mesh.centroid(e) for e in range(mesh.n_elems)])
        self.s_x = 0.5 * mesh.h  # per-element spatial half-width

        self.groups: List[ElementGroup] = []
        self.elem_group = np.zeros(mesh.n_elems, dtype=int)
        self._build_groups()

    def _local_vertices(self, e: int) -> np.ndarray:
        return (self.mesh.element_vertices(e) - self.centers[e]) / self.s_x[e]

    def _build_groups(self):
        key_to_group: Dict[tuple, int] = {}
        members: List[List[int]] = []
        for e in range(self.mesh.n_elems):
            loc = np.round(self._local_vertices(e), _ROUND)
            key = (
                float(round(self.mesh.a[e], _ROUND)),
                float(round(self.s_x[e], _ROUND)),
                tuple(map(tuple, loc)),
            )
            if key not in key_to_group:
                key_to_group[key] = len(members)
                members.append([])
            g = key_to_group[key]
            members[g].append(e)
            self.elem_group[e] = g
        for g, elems in enumerate(members):
            e0 = elems[0]
            frame = ElementFrame(
                center=tuple(self.centers[e0]) + (0.0,),
                scale=(float(self.s_x[e0]),) * self.d + (self.s_t,),
            )
            basis = build_basis(self.kind, self.p, self.d, float(self.mesh.a[e0]), frame)
            self.groups.append(
                ElementGroup(
                    basis=basis,
                    members=np.array(elems, dtype=int),
                    local_vertices=self._local_vertices(e0),
                    a=float(self.mesh.a[e0]),
                    s_x=float(self.s_x[e0]),
                )
            )

    def basis_for(self, e: int) -> LocalBasis:
        return self.groups[self.elem_group[e]].basis

    def dof_slice(self, e: int) -> slice:
        return slice(self.offsets[e], self.offsets[e + 1])

    def frame_for(self, e: int, t_mid: float) -> ElementFrame:
        """Physical frame of element e on the slab centred at time t_mid."""
        return ElementFrame(
            center=tuple(self.centers[e]) + (float(t_mid),),
            scale=(float(self.s_x[e]),) * self.d + (self.s_t,),
        )

    def to_local(self, e: int, points: np.ndarray, t_mid: float) -> np.ndarray:
        """Map physical space-time points into element-local coordinates."""
        pts = np.asarray(points, dtype=float)
        out = np.empty_like(pts)
        out[:, : self.d] = (pts[:, : self.d] - self.centers[e]) / self.s_x[e]
        out[:, self.d] = (pts[:, self.d] - t_mid) / self.s_t
        return out

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "tau": self.tau,
            "n_elements": int(self.mesh.n_elems),
            "funcs_per_element": int(self.n_funcs),
            "n_dof": int(self.n_dof),
            "n_groups": len(self.groups),
        }


def locate_element(mesh: SpatialMesh, x: np.ndarray) -> int:
    """Index of the element containing the spatial point x (ties resolved
    toward lower index); raises if x lies outside the mesh."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if mesh.dim == 1:
        lo = mesh.vertices[:, 0].min()
        hi = mesh.vertices[:, 0].max()
        if not (lo - 1e-12 <= x[0] <= hi + 1e-12):
            raise ValueError(f"point {x[0]} outside the domain ({lo}, {hi})")
        # uniform meshes are the norm; fall back to search otherwise
        widths = mesh.measures
        if np.allclose(widths, widths[0]):
            idx = int(np.clip((x[0] - lo) / widths[0], 0, mesh.n_elems - 1e-9))
            return min(idx, mesh.n_elems - 1)
        starts = np.minimum(
            mesh.vertices[mesh.elements[:, 0], 0], mesh.vertices[mesh.elements[:, 1], 0]
        )
        order = np.argsort(starts)
        pos = np.searchsorted(starts[order], x[0] + 1e-14) - 1
        return int(order[max(pos, 0)])
    for e in range(mesh.n_elems):
        v0, v1, v2 = mesh.element_vertices(e)
        m = np.column_stack([v1 - v0, v2 - v0])
        try:
            lam = np.linalg.solve(m, x - v0)
        except np.linalg.LinAlgError:
            continue
        if lam[0] >= -1e-12 and lam[1] >= -1e-12 and lam.sum() <= 1 + 1e-12:
            return e
    raise ValueError(f"point {tuple(x)} outside the mesh")
