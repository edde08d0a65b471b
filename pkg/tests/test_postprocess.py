import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from elastofds.dense_solver import solve_conv
from elastofds.fds import FastDirectSolver
from elastofds.geometry import BoundaryCurve, ClusterTree, build_mesh
from elastofds.medium import IncidentWave, default_medium, incident_displacement
from elastofds.postprocess import (FieldSample, ProximityError, distance_to_boundary,
                                   evaluate_field, nearest_node, nodal_intensity,
                                   null_field_residual, point_source_field, probe_points,
                                   scattered_field)


class TestFieldSample:
    @given(st.complex_numbers(max_magnitude=1e3), st.complex_numbers(max_magnitude=1e3))
    def test_intensity(self, a, b):
        s = FieldSample(np.zeros(2), np.array([a, b]))
        assert s.intensity >= 0
        assert_allclose(s.intensity, abs(a) ** 2 + abs(b) ** 2, rtol=1e-12)

    def test_nodal_intensity(self):
        x = np.array([[1 + 1j, 2.0], [0.0, 3j]])
        assert nodal_intensity(x, 1) == 9.0
        assert nodal_intensity(x, 0) == 6.0


class TestEvaluation:
    def test_zero_density_gives_incident(self, star400, medium, wave):
        pts = np.array([[3.0, 0.5], [-2.0, 4.0], [0.1, 0.0]])
        samples = evaluate_field(star400, medium, wave, np.zeros((400, 2)), pts)
        ref = incident_displacement(wave, medium, pts)
        for s, r in zip(samples, ref):
            assert_allclose(s.displacement, r, rtol=1e-15)

    def test_linear_in_density(self, star400, medium, rng):
        a = rng.normal(size=(400, 2)) + 1j * rng.normal(size=(400, 2))
        b = rng.normal(size=(400, 2)) + 1j * rng.normal(size=(400, 2))
        pts = np.array([[2.5, 1.0], [0.0, -3.0]])
        lhs = scattered_field(star400, medium, 2 * a - 1j * b, pts)
        rhs = 2 * scattered_field(star400, medium, a, pts) \
            - 1j * scattered_field(star400, medium, b, pts)
        assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_too_close_to_boundary(self, star400, medium):
        node = star400.nodes[17]
        with pytest.raises(ProximityError):
            scattered_field(star400, medium, np.ones((400, 2)), [node * 1.0001])

    def test_distance_to_boundary(self, circle64):
        # points on the axis: distance to a polygon inscribed in the unit circle
        d = distance_to_boundary(circle64, [[0.0, 0.0], [3.0, 0.0]])
        apothem = np.cos(np.pi / 64)
        assert_allclose(d, [apothem, 2.0], rtol=1e-12)

    def test_constant_density_inside(self, circle64):
        """Static limit: the double layer of a rigid translation is minus it inside.

        With normals into the cavity the representation of a constant density c is
        -c at interior points in the low-frequency limit.
        """
        m = default_medium(1e-6)
        c = np.array([0.7, -0.2])
        u = scattered_field(circle64, m, np.tile(c, (64, 1)), [[0.0, 0.0], [0.2, 0.1]])
        assert_allclose(u, -np.tile(c, (2, 1)), atol=1e-6)

    def test_point_source_is_fundamental_column(self, medium):
        u = point_source_field(medium, [0.0, 0.0], [1.0, 0.0], [[1.0, 0.5]])
        assert u.shape == (1, 2)
        assert np.all(np.isfinite(u))


class TestNullField:
    def test_probe_set(self, star400):
        pts = probe_points()
        assert pts.shape == (16, 2)
        assert distance_to_boundary(star400, pts).min() > 0.2

    def test_conv_solution_is_small_inside(self, star400, medium, wave, conv400):
        assert null_field_residual(star400, medium, wave, conv400) < 1e-5

    def test_wrong_solution_is_not(self, star400, medium, wave, conv400):
        assert null_field_residual(star400, medium, wave, 1.1 * conv400) > 1e-2

    def test_fds_at_1600(self, medium, wave):
        mesh = build_mesh(BoundaryCurve(), 1600)
        x = FastDirectSolver(mesh, medium, 4, 1, 1e-10).solve_waves([wave])[..., 0]
        assert null_field_residual(mesh, medium, wave, x) <= 1e-3

    def test_decreases_under_refinement(self, medium, wave):
        res = []
        for N in (400, 800, 1600):
            mesh = build_mesh(BoundaryCurve(), N)
            x = solve_conv(mesh, medium, wave, ClusterTree(N, 0)).solution[..., 0]
            res.append(null_field_residual(mesh, medium, wave, x))
        assert res[0] >= 1.5 * res[1] and res[1] >= 1.5 * res[2]


class TestFarField:
    def test_inverse_square_root_decay(self, star400, medium, conv400):
        theta = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        d = np.column_stack([np.cos(theta), np.sin(theta)])
        near = np.linalg.norm(scattered_field(star400, medium, conv400, 10 * d), axis=1)
        far = np.linalg.norm(scattered_field(star400, medium, conv400, 50 * d), axis=1)
        ratio = far.max() / near.max()
        assert abs(ratio * np.sqrt(5.0) - 1.0) <= 0.3


class TestIntensity:
    @pytest.mark.parametrize("omega", [1.0, 3.3, 6.1])
    def test_fds_matches_bm(self, omega):
        mesh = build_mesh(BoundaryCurve(), 800)
        m, w = default_medium(omega), IncidentWave()
        node = nearest_node(mesh)
        bm = solve_conv(mesh, m, w, ClusterTree(800, 0)).solution[..., 0]
        fds = FastDirectSolver(mesh, m, 3, 1, 1e-8).solve_waves([w])[..., 0]
        a, b = nodal_intensity(fds, node), nodal_intensity(bm, node)
        assert a >= 0
        assert abs(a - b) <= 1e-4 * b

    def test_nearest_node(self, star400):
        assert_allclose(star400.nodes[nearest_node(star400)], [1.0, 0.0], atol=1e-12)
