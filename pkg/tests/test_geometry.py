import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from elastofds.geometry import (BoundaryCurve, ClusterTree, build_mesh, build_tree,
                                curve_point, read_mesh, write_mesh)
from elastofds.medium import ParameterError


class TestCurve:
    def test_theta_zero(self):
        assert_allclose(curve_point(BoundaryCurve(), 0.0), [1.0, 0.0], atol=1e-15)

    def test_theta_pi(self):
        assert_allclose(curve_point(BoundaryCurve(), math.pi), [-0.7 / 1.3, 0.0], atol=1e-15)

    @given(st.floats(-20, 20))
    def test_periodic(self, theta):
        c = BoundaryCurve()
        assert_allclose(c.point(theta), c.point(theta + 2 * math.pi), atol=1e-13)


class TestMesh:
    def test_first_node(self, star400):
        assert_array_equal(star400.nodes[0], [1.0, 0.0])

    def test_perimeter_convergence(self):
        p = BoundaryCurve().perimeter()
        l1600 = build_mesh(BoundaryCurve(), 1600).lengths.sum()
        l3200 = build_mesh(BoundaryCurve(), 3200).lengths.sum()
        assert abs(l1600 - l3200) / l3200 < 1e-3
        assert abs(l3200 - p) < abs(l1600 - p)

    def test_normals(self, star400):
        n, t = star400.normals, star400.tangents
        assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-14)
        assert_allclose(np.einsum("ec,ec->e", n, t), 0.0, atol=1e-14)

    def test_normals_point_into_cavity(self, star400):
        centroid = star400.nodes.mean(axis=0)
        assert np.all(np.einsum("ec,ec->e", centroid - star400.midpoints, star400.normals) > 0)

    def test_closed(self, star400):
        assert_allclose(star400.ends[-1], star400.starts[0])

    def test_too_small(self):
        with pytest.raises(ParameterError):
            build_mesh(BoundaryCurve(), 6)

    def test_refinement_halves_lengths(self):
        h1 = build_mesh(BoundaryCurve(), 800).lengths.max()
        h2 = build_mesh(BoundaryCurve(), 1600).lengths.max()
        assert abs(h1 / h2 - 2.0) < 0.1

    def test_text_round_trip(self, star400, tmp_path):
        path = tmp_path / "mesh.txt"
        write_mesh(star400, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "400" and len(lines) == 401
        assert_array_equal(read_mesh(path).nodes, star400.nodes)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "mesh.txt"
        path.write_text("10\n0 0\n1 0\n")
        with pytest.raises(ParameterError):
            read_mesh(path)


class TestClusterTree:
    def test_leaf_sequences(self):
        t = build_tree(400, 2)
        assert list(t.leaves()) == [3, 4, 5, 6]
        # 1-based J_3(1) = 1, J_4(1) = 101
        assert t.indices(3)[0] + 1 == 1 and t.indices(4)[0] + 1 == 101

    def test_single_cell(self):
        t = build_tree(400, 0)
        assert list(t.leaves()) == [0]
        assert_array_equal(t.indices(0), np.arange(400))

    def test_navigation(self):
        assert ClusterTree.parent(5) == 2
        assert ClusterTree.children(2) == (5, 6)

    def test_indivisible(self):
        with pytest.raises(ParameterError):
            build_tree(401, 2)

    @given(st.integers(0, 7), st.integers(1, 40))
    def test_partition(self, L, n):
        t = ClusterTree(n << L, L)
        leaves = np.concatenate([t.indices(p) for p in t.leaves()])
        assert_array_equal(leaves, np.arange(n << L))
        for p in range(1, t.n_cells):
            assert p in t.children(t.parent(p))

    def test_parent_is_union_of_children(self):
        t = ClusterTree(800, 3)
        for q in range(t.level_cells(3).start):
            a, b = t.children(q)
            assert_array_equal(t.indices(q), np.concatenate([t.indices(a), t.indices(b)]))
