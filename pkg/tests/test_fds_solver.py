import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import lu_solve

from elastofds.assembly import pack_block
from elastofds.dense_solver import solve_conv
from elastofds.fds import FastDirectSolver
from elastofds.geometry import BoundaryCurve, ClusterTree, build_mesh
from elastofds.medium import IncidentWave, ParameterError


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class MatrixAssembler:
    """Stand-in assembler serving entries of an explicit 2N x 2N matrix.

    Global ordering is component-major over all nodes (index c N + s). The
    proxy blocks are random mixtures of the matrix's far-field factors, so an
    exactly low-rank off-diagonal part is captured exactly.
    """

    def __init__(self, mesh, A, left, right, seed=0):
        self.mesh, self.A, self.N = mesh, A, mesh.N
        self.left, self.right = left, right
        self._rng = np.random.default_rng(seed)

    def _idx(self, dofs):
        return np.concatenate([np.asarray(dofs[0]), self.N + np.asarray(dofs[1])])

    def dof_block(self, rows, cols):
        return self.A[np.ix_(self._idx(rows), self._idx(cols))]

    def dof_block_pair(self, xr, xc, yr, yc):
        return self.dof_block(xr, yc), self.dof_block(yr, xc)

    def block(self, rows, cols):
        return self.dof_block((rows, rows), (cols, cols))

    def polygon_blocks(self, poly, nodes):
        idx = self._idx((nodes, nodes))
        r = self.left.shape[1]
        m = 2 * poly.n_nodes
        P = self._rng.normal(size=(m, r)) @ self.right[idx].T
        Q = self.left[idx] @ self._rng.normal(size=(r, m))
        return P, Q


def synthetic_system(mesh, leaf, rank, seed=1, scale=1.0):
    rng = np.random.default_rng(seed)
    N = mesh.N
    A = np.zeros((2 * N, 2 * N), dtype=complex)
    for start in range(0, N, leaf):
        idx = np.concatenate([np.arange(start, start + leaf), N + np.arange(start, start + leaf)])
        blk = rng.normal(size=(2 * leaf, 2 * leaf)) + 1j * rng.normal(size=(2 * leaf, 2 * leaf))
        A[np.ix_(idx, idx)] = blk + 4 * np.sqrt(leaf) * np.eye(2 * leaf)
    left = scale * (rng.normal(size=(2 * N, rank)) + 1j * rng.normal(size=(2 * N, rank)))
    right = scale * (rng.normal(size=(2 * N, rank)) + 1j * rng.normal(size=(2 * N, rank)))
    off = left @ right.T
    for start in range(0, N, leaf):
        idx = np.concatenate([np.arange(start, start + leaf), N + np.arange(start, start + leaf)])
        off[np.ix_(idx, idx)] = 0.0
    return A + off, left, right


@pytest.fixture(scope="module")
def mesh256():
    return build_mesh(BoundaryCurve(), 256)


class TestSyntheticSystems:
    def test_exact_low_rank_off_diagonal(self, mesh256, medium, rng):
        A, left, right = synthetic_system(mesh256, 32, 5)
        asm = MatrixAssembler(mesh256, A, left, right)
        S = FastDirectSolver(mesh256, medium, 3, 1, 1e-12, assembler=asm)
        F = rng.normal(size=(256, 2)) + 1j * rng.normal(size=(256, 2))
        x = S.solve(F)
        ref = np.linalg.solve(A, np.concatenate([F[:, 0], F[:, 1]]))
        assert relative(np.concatenate([x[:, 0], x[:, 1]]), ref) <= 1e-11

    def test_zero_off_diagonal(self, mesh256, medium, rng):
        A, left, right = synthetic_system(mesh256, 64, 3, scale=0.0)
        asm = MatrixAssembler(mesh256, A, left, right)
        S = FastDirectSolver(mesh256, medium, 2, 1, 1e-10, assembler=asm)
        fz = S.factor()
        assert all(c.rank == 0 for c in fz.cells.values())
        F = rng.normal(size=(256, 2)) + 1j * rng.normal(size=(256, 2))
        x = S.solve(F)
        for p in S.tree.leaves():
            idx = S.tree.indices(p)
            expected = lu_solve(fz.cells[p].lu, pack_block(F[idx]))
            assert_allclose(pack_block(x[idx]), expected, rtol=1e-13, atol=1e-15)

    def test_cell_identity(self, mesh256, medium):
        A, left, right = synthetic_system(mesh256, 32, 5)
        S = FastDirectSolver(mesh256, medium, 3, 1, 1e-12,
                             assembler=MatrixAssembler(mesh256, A, left, right))
        for c in S.factor().cells.values():
            k2 = 2 * c.rank
            assert c.A_tilde.shape == (k2, k2)
            assert_allclose(c.A_tilde @ (c.V @ c.Ainv_U), np.eye(k2), atol=1e-10)


class TestAgainstConv:
    def test_one_level(self, star400, medium, wave, conv400):
        S = FastDirectSolver(star400, medium, 2, 1, 1e-8)
        assert relative(S.solve_waves([wave])[..., 0], conv400) <= 1e-7

    def test_multi_level(self, medium, wave):
        mesh = build_mesh(BoundaryCurve(), 1600)
        ref = solve_conv(mesh, medium, wave, ClusterTree(1600, 4)).solution[..., 0]
        x = FastDirectSolver(mesh, medium, 4, 1, 1e-8).solve_waves([wave])[..., 0]
        assert relative(x, ref) <= 1e-6

    def test_cell_identity(self, fds400):
        for c in fds400.factorization.cells.values():
            k2 = 2 * c.rank
            assert_allclose(c.A_tilde @ (c.V @ c.Ainv_U), np.eye(k2), atol=1e-10)

    def test_skeleton_solution(self, fds400, conv400, wave):
        fds400.solve_waves([wave])
        for p, y in fds400.last_skeleton_solution.items():
            c = fds400.factorization.cells[p]
            ref = c.V @ pack_block(conv400[fds400.tree.indices(p)])
            assert np.linalg.norm(y[:, 0] - ref) <= 1e-6 * np.linalg.norm(ref)

    def test_top_residual(self, fds400, wave):
        fz = fds400.factorization
        f = np.random.default_rng(3).normal(size=fz.top_dimension) + 0j
        x = lu_solve(fz.top_lu, f)
        assert np.linalg.norm(fz.top_matrix @ x - f) <= 1e-11 * np.linalg.norm(f)

    def test_ell0_equal_to_levels_is_dense(self, star400, medium, wave, conv400):
        S = FastDirectSolver(star400, medium, 2, 2, 1e-8)
        fz = S.factor()
        assert not fz.cells and fz.top_dimension == 800
        assert relative(S.solve_waves([wave])[..., 0], conv400) <= 1e-12

    def test_single_top_block(self, star400, medium, wave, conv400):
        S = FastDirectSolver(star400, medium, 2, 0, 1e-10)
        fz = S.factor()
        assert fz.top_cells == [0]
        assert relative(S.solve_waves([wave])[..., 0], conv400) <= 1e-8


class TestReuse:
    def test_same_rhs_bitwise(self, fds400, wave):
        F = fds400.rhs(wave)
        assert_array_equal(fds400.solve(F), fds400.solve(F))

    def test_extra_rhs_matches_fresh_solve(self, star400, medium, fds400):
        waves = [IncidentWave.from_angle(2 * np.pi * j / 40) for j in range(40)]
        many = fds400.solve_waves(waves)
        fresh = FastDirectSolver(star400, medium, 2, 1, 1e-10)
        x36 = fresh.solve_waves([waves[36]])[..., 0]
        assert relative(many[..., 36], x36) <= 1e-12

    def test_batched_equals_single(self, fds400):
        waves = [IncidentWave.from_angle(t) for t in (0.1, 1.4, 2.9)]
        many = fds400.solve_waves(waves)
        for j, w in enumerate(waves):
            assert_allclose(fds400.solve_waves([w])[..., 0], many[..., j], rtol=1e-14,
                            atol=1e-14 * np.abs(many).max())

    def test_rhs_shape_checked(self, fds400):
        with pytest.raises(ValueError):
            fds400.solve(np.zeros((399, 2)))

    def test_threads_bitwise(self, medium, wave):
        mesh = build_mesh(BoundaryCurve(), 800)
        a = FastDirectSolver(mesh, medium, 3, 1, 1e-8, threads=1).solve_waves([wave])
        b = FastDirectSolver(mesh, medium, 3, 1, 1e-8, threads=3).solve_waves([wave])
        assert_array_equal(a, b)


class TestParameters:
    def test_bad_epsilon(self, star400, medium):
        with pytest.raises(ParameterError):
            FastDirectSolver(star400, medium, 2, 1, 0.0)

    def test_bad_ell0(self, star400, medium):
        with pytest.raises(ParameterError):
            FastDirectSolver(star400, medium, 2, 3)

    def test_indivisible(self, star400, medium):
        with pytest.raises(ParameterError):
            FastDirectSolver(star400, medium, 5)


@pytest.fixture(scope="module")
def fds6400(medium, wave):
    S = FastDirectSolver(build_mesh(BoundaryCurve(), 6400), medium, 6, 1, 1e-8)
    S.factor()
    S.solve_waves([wave])
    return S


@pytest.mark.slow
class TestLarge:
    def test_top_dimension_small(self, fds6400):
        assert fds6400.factorization.top_dimension < 2 * 6400 / 4

    def test_downward_cheap(self, fds6400):
        assert fds6400.last_solve_times["downward"] <= 0.05 * fds6400.factorization.times["factor_total"]
