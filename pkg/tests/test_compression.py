import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from elastofds.assembly import Assembler
from elastofds.compression import (NoCompressionWarning, PivotedQR, ProxyBuilder,
                                   compress_cell, enclosed_dofs, interaction_matrices,
                                   interpolative_decompose, support_elements)
from elastofds.fds import FastDirectSolver
from elastofds.geometry import BoundaryCurve, ClusterTree, build_mesh
from elastofds.medium import ParameterError


def decaying(rng, m, n, rate=1.0):
    k = min(m, n)
    U = np.linalg.qr(rng.normal(size=(m, k)) + 1j * rng.normal(size=(m, k)))[0]
    V = np.linalg.qr(rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)))[0]
    return (U * 10.0 ** (-rate * np.arange(k))) @ V.conj().T


def whole_cell_dofs(tree, p):
    idx = tree.indices(p)
    return (idx, idx)


class TestInterpolativeDecomposition:
    def test_rank_one(self, rng):
        M = np.outer(rng.normal(size=30), rng.normal(size=20) + 1j)
        d = interpolative_decompose(M, 1e-10)
        assert d.rank == 1
        assert np.linalg.norm(M - M[:, d.skeleton] @ d.coeff) <= 1e-13 * np.linalg.norm(M)

    def test_zero_matrix(self):
        d = interpolative_decompose(np.zeros((5, 4)), 1e-8)
        assert d.rank == 0 and d.skeleton.size == 0

    def test_decaying_spectrum(self, rng):
        M = decaying(rng, 100, 60)
        eps = 1e-8
        d = interpolative_decompose(M, eps)
        err = np.linalg.norm(M - M[:, d.skeleton] @ d.coeff, 2)
        assert err <= 10 * eps * np.linalg.norm(M, 2)

    @given(st.integers(2, 40), st.integers(2, 40), st.sampled_from([1e-4, 1e-8, 1e-12]),
           st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_properties(self, m, n, eps, seed):
        rng = np.random.default_rng(seed)
        M = decaying(rng, m, n, rate=0.7)
        d = interpolative_decompose(M, eps)
        assert d.rank <= min(m, n)
        assert_allclose(d.coeff[:, d.skeleton], np.eye(d.rank), atol=1e-15)
        err = np.linalg.norm(M - M[:, d.skeleton] @ d.coeff, 2)
        assert err <= 10 * eps * np.linalg.norm(M, 2) + 1e-13 * np.linalg.norm(M, 2)

    @pytest.mark.parametrize("eps", [0.0, -1e-8])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ParameterError):
            interpolative_decompose(np.eye(3), eps)

    def test_empty(self):
        with pytest.raises(ParameterError):
            interpolative_decompose(np.zeros((0, 3)), 1e-8)

    def test_deterministic(self, rng):
        M = decaying(rng, 50, 40, 0.3)
        a, b = interpolative_decompose(M, 1e-9), interpolative_decompose(M.copy(), 1e-9)
        assert_array_equal(a.skeleton, b.skeleton)
        assert_array_equal(a.coeff, b.coeff)

    def test_forced_rank_pads_pivots(self, rng):
        M = decaying(rng, 30, 20, 1.0)
        f = PivotedQR(M)
        k = f.rank(1e-6)
        d = f.decomposition(k + 3, 1e-6)
        assert d.rank == k + 3
        assert_array_equal(d.skeleton[:k], f.decomposition(k, 1e-6).skeleton)


class TestProxy:
    def test_whole_boundary_encloses_nothing_else(self, star400):
        proxy = ProxyBuilder(star400).build(np.arange(400))
        assert proxy.enclosed_elements.size == 0

    @pytest.mark.parametrize("N", [400, 1600])
    def test_proxy_size_fixed(self, N):
        mesh = build_mesh(BoundaryCurve(), N)
        own = support_elements(N, np.arange(100))
        assert ProxyBuilder(mesh, 1.5, 64).build(own).m_prime == 64

    @given(st.integers(0, 399), st.integers(2, 150))
    @settings(max_examples=30, deadline=None)
    def test_enclosed_excludes_own(self, start, size):
        mesh = build_mesh(BoundaryCurve(), 400)
        own = support_elements(400, (start + np.arange(size)) % 400)
        proxy = ProxyBuilder(mesh).build(own)
        assert np.intersect1d(proxy.enclosed_elements, own).size == 0

    def test_circle_encloses_cell(self, star400):
        own = support_elements(400, np.arange(100, 200))
        proxy = ProxyBuilder(star400, 1.5).build(own)
        pts = np.concatenate([star400.starts[own], star400.ends[own]])
        assert np.hypot(*(pts - proxy.center).T).max() < proxy.radius

    def test_radius_factor_checked(self, star400):
        with pytest.raises(ParameterError):
            ProxyBuilder(star400, 1.0)

    def test_inward_normals(self, star400):
        proxy = ProxyBuilder(star400).build(support_elements(400, np.arange(50)))
        poly = proxy.polygon
        assert np.all(np.einsum("ec,ec->e", proxy.center - poly.midpoints, poly.normals) > 0)

    def test_enclosed_dofs_owned_by_others(self, star400):
        tree = ClusterTree(400, 2)
        owner = np.full((2, 400), -1)
        for p in tree.leaves():
            owner[:, tree.indices(p)] = p
        proxy = ProxyBuilder(star400).build(support_elements(400, tree.indices(4)))
        enc = enclosed_dofs(400, proxy, owner, 4)
        for c in range(2):
            assert enc[c].size > 0
            assert np.all(owner[c, enc[c]] != 4)


@pytest.fixture(scope="module")
def leaf_setup(star400, medium):
    tree = ClusterTree(400, 2)
    asm = Assembler(star400, medium, 1j / medium.k_T)
    owner = np.full((2, 400), -1)
    for p in tree.leaves():
        owner[:, tree.indices(p)] = p
    return tree, asm, owner


class TestCellBasis:
    def basis(self, leaf_setup, p, eps):
        tree, asm, owner = leaf_setup
        dofs = whole_cell_dofs(tree, p)
        proxy = ProxyBuilder(asm.mesh).build(support_elements(400, tree.indices(p)))
        enc = enclosed_dofs(400, proxy, owner, p)
        MV, MU = interaction_matrices(asm, proxy, dofs, dofs, enc, enc)
        return compress_cell(MV, MU, eps, p)

    def test_structure(self, leaf_setup):
        b = self.basis(leaf_setup, 4, 1e-8)
        k, m = b.rank, 100
        assert b.U.shape == (2 * m, 2 * k) and b.V.shape == (2 * k, 2 * m)
        assert np.abs(b.U[:m, k:]).max() == 0 and np.abs(b.U[m:, :k]).max() == 0
        assert np.abs(b.V[:k, m:]).max() == 0 and np.abs(b.V[k:, :m]).max() == 0
        assert_allclose(b.V[:k, :m][:, b.col_skeleton[0]], np.eye(k), atol=1e-15)
        assert_allclose(b.V[k:, m:][:, b.col_skeleton[1]], np.eye(k), atol=1e-15)
        assert_allclose(b.U[:m, :k][b.row_skeleton[0]], np.eye(k), atol=1e-15)
        assert_allclose(b.U[m:, k:][b.row_skeleton[1]], np.eye(k), atol=1e-15)
        assert k == max(b.raw_ranks)

    def test_skeleton_is_subsequence(self, leaf_setup):
        tree = leaf_setup[0]
        b = self.basis(leaf_setup, 5, 1e-8)
        for c in range(2):
            assert set(b.row_dofs(whole_cell_dofs(tree, 5))[c]) <= set(tree.indices(5))
            assert len(set(b.row_skeleton[c])) == b.rank

    def test_proxy_matches_brute_force(self, leaf_setup):
        """Replacing the proxy by all other DOFs gives errors of the same order."""
        tree, asm, _ = leaf_setup
        eps, p = 1e-6, 3
        dofs = whole_cell_dofs(tree, p)
        others = np.setdiff1d(np.arange(400), tree.indices(p))
        far = (others, others)
        MV, MU = asm.dof_block(far, dofs), asm.dof_block(dofs, far)
        brute = compress_cell(MV, MU, eps, p)
        proxy = self.basis(leaf_setup, p, eps)

        def v_error(b):
            skel = (tree.indices(p)[b.col_skeleton[0]], tree.indices(p)[b.col_skeleton[1]])
            return np.linalg.norm(MV - asm.dof_block(far, skel) @ b.V) / np.linalg.norm(MV)

        e_brute, e_proxy = v_error(brute), v_error(proxy)
        assert e_proxy <= 100 * max(e_brute, eps)

    def test_no_compression_warning(self, rng):
        MV = rng.normal(size=(6, 8))
        MU = rng.normal(size=(8, 6))
        with pytest.warns(NoCompressionWarning):
            compress_cell(MV, MU, 1e-12)


class TestLowRankConsistency:
    @pytest.mark.parametrize("eps", [1e-6, 1e-8])
    def test_all_leaf_pairs(self, star400, medium, eps):
        S = FastDirectSolver(star400, medium, 2, 1, eps)
        fz = S.factor()
        for i in range(3, 7):
            for j in range(3, 7):
                if i == j:
                    continue
                a, b = fz.cells[i], fz.cells[j]
                A = S.asm.dof_block(a.rows, b.cols)
                R = S.asm.dof_block(a.skeleton_rows, b.skeleton_cols)
                err = np.linalg.norm(A - a.U @ R @ b.V)
                assert err <= 100 * eps * np.linalg.norm(A), (i, j)

    def test_rank_bounded_under_refinement(self, medium):
        ranks = []
        for N, L in ((400, 2), (800, 3), (1600, 4)):
            S = FastDirectSolver(build_mesh(BoundaryCurve(), N), medium, L, L - 1, 1e-8)
            ranks.append(max(S.factor().ranks(L)))
        assert ranks[1] <= ranks[0] and ranks[2] <= ranks[0]
