import numpy as np
import pytest

from wavetrefftz.basis import trefftz_dim, full_dim
from wavetrefftz.meshing import build_mesh_1d, build_mesh_2d_unit_square
from wavetrefftz.spaces import SlabSpace, locate_element


class TestSlabSpace:
    def test_dof_layout_1d(self):
        mesh = build_mesh_1d(6)
        space = SlabSpace(mesh, 3, "trefftz", 0.1)
        assert space.n_funcs == trefftz_dim(3, 1) == 7
        assert space.n_dof == 42
        assert space.dof_slice(2) == slice(14, 21)

    def test_full_space_counts(self):
        mesh = build_mesh_2d_unit_square(2)
        space = SlabSpace(mesh, 2, "full", 0.2)
        assert space.n_funcs == full_dim(2, 2) == 10
        assert space.n_dof == 10 * mesh.n_elems

    def test_uniform_mesh_one_group(self):
        space = SlabSpace(build_mesh_1d(40), 2, "trefftz", 0.05)
        assert len(space.groups) == 1
        assert space.groups[0].members.size == 40

    def test_structured_2d_two_groups(self):
        space = SlabSpace(build_mesh_2d_unit_square(3), 2, "trefftz", 0.1)
        assert len(space.groups) == 2
        assert sum(g.members.size for g in space.groups) == space.mesh.n_elems

    def test_variable_coefficient_splits_groups(self):
        mesh = build_mesh_1d(4, a=[1.0, 4.0, 1.0, 4.0])
        space = SlabSpace(mesh, 2, "trefftz", 0.1)
        assert len(space.groups) == 2

    def test_local_coordinates_round_trip(self):
        mesh = build_mesh_1d(5)
        space = SlabSpace(mesh, 2, "trefftz", 0.04)
        e = 3
        t_mid = 0.12
        pts = np.array([[0.65, 0.10], [0.7, 0.14]])
        loc = space.to_local(e, pts, t_mid)
        frame = space.frame_for(e, t_mid)
        assert np.allclose(frame.to_physical(loc), pts)
        assert np.all(np.abs(loc) <= 1.0 + 1e-12)

    def test_basis_kind_validation(self):
        with pytest.raises(ValueError):
            SlabSpace(build_mesh_1d(2), 2, "spectral", 0.1)
        with pytest.raises(ValueError):
            SlabSpace(build_mesh_1d(2), 2, "trefftz", -0.1)


class TestLocate:
    def test_1d(self):
        mesh = build_mesh_1d(8)
        assert locate_element(mesh, [0.06]) == 0
        assert locate_element(mesh, [0.99]) == 7
        with pytest.raises(ValueError):
            locate_element(mesh, [1.2])

    def test_2d(self):
        mesh = build_mesh_2d_unit_square(2)
        e = locate_element(mesh, np.array([0.3, 0.1]))
        v = mesh.element_vertices(e)
        # barycentric containment
        m = np.column_stack([v[1] - v[0], v[2] - v[0]])
        lam = np.linalg.solve(m, np.array([0.3, 0.1]) - v[0])
        assert lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12
        with pytest.raises(ValueError):
            locate_element(mesh, np.array([1.5, 0.2]))
