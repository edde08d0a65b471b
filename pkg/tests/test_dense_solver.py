import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from elastofds.dense_solver import (ConditionWarning, DenseFactorization, SolverError,
                                    conv_solve, conv_solve_non_bm, solve_conv)
from elastofds.geometry import BoundaryCurve, ClusterTree, build_mesh
from elastofds.medium import IncidentWave, default_medium
from elastofds.postprocess import null_field_residual

# fictitious frequency of the plain double-layer equation on the N = 400 star mesh,
# located by minimizing the condition estimate
FICTITIOUS_OMEGA_400 = 4.544961236


class TestDenseFactorization:
    def test_identity(self, rng):
        f = rng.normal(size=7) + 1j * rng.normal(size=7)
        assert_allclose(conv_solve(np.eye(7), f), f)

    def test_random_system(self, rng):
        A = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50)) + 20 * np.eye(50)
        f = rng.normal(size=50) + 1j * rng.normal(size=50)
        x = conv_solve(A, f)
        assert np.linalg.norm(A @ x - f) <= 1e-12 * np.linalg.norm(f)

    def test_singular(self):
        with pytest.raises(SolverError, match="pivot"):
            DenseFactorization(np.zeros((4, 4), dtype=complex))

    def test_not_square(self):
        with pytest.raises(ValueError):
            DenseFactorization(np.ones((3, 4)))

    def test_batched_equals_one_by_one(self, rng):
        A = rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40)) + 10 * np.eye(40)
        F = rng.normal(size=(40, 10)) + 1j * rng.normal(size=(40, 10))
        fac = DenseFactorization(A)
        X = fac.solve(F)
        for j in range(10):
            assert_allclose(fac.solve(F[:, j]), X[:, j], rtol=1e-14, atol=1e-14)

    def test_condition_estimate(self, rng):
        A = np.diag([1.0, 1e-3, 1e-9]).astype(complex)
        fac = DenseFactorization(A, estimate_condition=True)
        assert_allclose(fac.rcond, 1e-9, rtol=1e-6)


class TestConv:
    def test_solution_and_null_field(self, conv400, star400, medium, wave):
        assert np.all(np.isfinite(conv400))
        assert null_field_residual(star400, medium, wave, conv400) < 1e-3

    def test_deterministic(self, conv400, star400, medium, wave):
        again = solve_conv(star400, medium, wave, ClusterTree(400, 2)).solution[..., 0]
        assert_array_equal(again, conv400)

    def test_layout_independent(self, conv400, star400, medium, wave):
        other = solve_conv(star400, medium, wave, ClusterTree(400, 0)).solution[..., 0]
        assert_allclose(other, conv400, rtol=1e-12, atol=1e-12 * np.abs(conv400).max())

    def test_multiple_waves(self, conv400, star400, medium):
        waves = [IncidentWave.from_angle(t) for t in (0.0, 0.5)]
        res = solve_conv(star400, medium, waves, ClusterTree(400, 2))
        assert res.solution.shape == (400, 2, 2)
        assert_allclose(res.solution[..., 0], conv400, rtol=1e-14, atol=1e-14)
        assert set(res.times) == {"assembly", "factorization", "solve"}
        assert res.total_time > 0


class TestNonBurtonMiller:
    def test_agrees_with_bm_at_generic_frequency(self):
        mesh = build_mesh(BoundaryCurve(), 1600)
        m = default_medium(2.0)
        w = IncidentWave()
        bm = solve_conv(mesh, m, w, ClusterTree(1600, 0)).solution
        plain = conv_solve_non_bm(mesh, m, w).solution
        assert np.linalg.norm(plain - bm) <= 1e-3 * np.linalg.norm(bm)

    def test_spike_at_fictitious_frequency(self, star400, wave):
        m = default_medium(FICTITIOUS_OMEGA_400)
        bm = solve_conv(star400, m, wave, ClusterTree(400, 0)).solution
        with pytest.warns(ConditionWarning):
            plain = conv_solve_non_bm(star400, m, wave)
        assert plain.rcond < 1e-6
        assert np.linalg.norm(plain.solution) > 1.5 * np.linalg.norm(bm)

    def test_bm_unaffected_at_fictitious_frequency(self, star400, wave):
        tree = ClusterTree(400, 0)
        a = solve_conv(star400, default_medium(FICTITIOUS_OMEGA_400), wave, tree,
                       estimate_condition=True)
        b = solve_conv(star400, default_medium(FICTITIOUS_OMEGA_400 + 1e-3), wave, tree)
        assert a.rcond > 1e-4
        assert_allclose(np.linalg.norm(a.solution), np.linalg.norm(b.solution), rtol=1e-3)
