"""Galerkin blocks of D + I/2 + alpha N on P1 hats, dense systems and right-hand sides.

Node s owns the hat that is local hat 0 on element s and local hat 1 on
element s - 1. Every node-level entry is the sum of four element-pair
contributions taken in one fixed order, and element pairs are integrated in a
canonical orientation, so a block assembled on its own is bit-for-bit equal to
the same block cut out of the dense matrix.

Blocks are component-major: for rows (s_1..s_m) the row order is
(s_1, comp 0) .. (s_m, comp 0), (s_1, comp 1) .. (s_m, comp 1).
"""

from __future__ import annotations

import numpy as np

from .engine import PairEngine, gather_nodes
from .geometry import BoundaryMesh, ClusterTree, Polygon
from .kernels import KernelConstants
from .medium import ElasticMedium, IncidentWave, incident_displacement, incident_traction
from .quadrature import gauss01

RHS_ORDER = 6
DENSE_BUDGET_BYTES = 3.5e9
DENSE_GROUP = 256            # nodes per row/column group in dense assembly
TABLE_NEAR_FRACTION = 0.05   # radial table starts at this fraction of the shortest element
TABLE_REACH = 8.0            # radial table ends at this multiple of the mesh half-diagonal


class MemoryBudgetError(MemoryError):
    """A dense allocation would exceed the configured byte budget."""


def component_major_map(n: int, offset: int = 0) -> np.ndarray:
    """(2, n) positions of (component, local node) in a component-major block."""
    base = np.arange(n, dtype=np.int_) + offset
    return np.stack([base, base + n])


class CellLayout:
    """Global ordering used by dense systems: leaf by leaf, component-major inside a leaf."""

    def __init__(self, tree: ClusterTree):
        self.tree = tree
        n = tree.leaf_size
        s = np.arange(tree.N)
        leaf, local = np.divmod(s, n)
        self.position = np.stack([leaf * 2 * n + local, leaf * 2 * n + n + local])

    def pack(self, nodal: np.ndarray) -> np.ndarray:
        """(N, 2) nodal values (or (N, 2, m)) to the global vector ordering."""
        nodal = np.asarray(nodal)
        out = np.empty((2 * self.tree.N,) + nodal.shape[2:], dtype=nodal.dtype)
        out[self.position[0]] = nodal[:, 0]
        out[self.position[1]] = nodal[:, 1]
        return out

    def unpack(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        return np.stack([vec[self.position[0]], vec[self.position[1]]], axis=1)


def pack_block(nodal: np.ndarray) -> np.ndarray:
    """(m, 2, ...) nodal values to a component-major vector."""
    nodal = np.asarray(nodal)
    return np.concatenate([nodal[:, 0], nodal[:, 1]])


def unpack_block(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    m = len(vec) // 2
    return np.stack([vec[:m], vec[m:]], axis=1)


def mass_matrix(mesh: Polygon) -> np.ndarray:
    """Scalar P1 mass matrix (N, N), dense; for tests and small meshes."""
    N, h = mesh.n_nodes, mesh.lengths
    M = np.zeros((N, N))
    s = np.arange(N)
    M[s, s] = (h[s - 1] + h) / 3.0
    M[s, (s + 1) % N] += h / 6.0
    M[(s + 1) % N, s] += h / 6.0
    return M


def mesh_radius(mesh: Polygon) -> float:
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    return 0.5 * float(np.hypot(*(hi - lo)))


class Assembler:
    """Entries of d_weight D + mass_weight I0 + alpha N for one mesh and medium.

    The defaults give the Burton-Miller operator D + I/2 + alpha N. Setting
    ``static`` uses the Kelvin (zero-frequency) kernels.
    """

    def __init__(self, mesh: BoundaryMesh, medium: ElasticMedium, alpha: complex,
                 backend: str | None = None, threads: int = 1, static: bool = False,
                 d_weight: float = 1.0, mass_weight: float = 0.5):
        self.mesh = mesh
        self.medium = medium
        self.alpha = complex(alpha)
        self.d_weight = float(d_weight)
        self.mass_weight = float(mass_weight)
        self.kc = KernelConstants.from_medium(medium, static=static)
        self.N = mesh.n_nodes
        self.geometry = mesh.element_geometry()
        h = mesh.lengths
        self.engine = PairEngine(self.kc, TABLE_NEAR_FRACTION * float(h.min()),
                                 TABLE_REACH * mesh_radius(mesh), float(h.min()),
                                 float(h.max()), backend=backend, threads=threads)
        self._touch = self._touching_cache()

    @property
    def backend(self) -> str:
        return self.engine.backend

    @property
    def threads(self) -> int:
        return self.engine.threads

    @threads.setter
    def threads(self, value: int) -> None:
        self.engine.threads = max(1, int(value))

    def _combine(self, D, N):
        if self.d_weight == 1.0:
            return D + self.alpha * N
        return self.d_weight * D + self.alpha * N

    def _touching_cache(self) -> np.ndarray:
        """Element matrices of (e, e - 1), (e, e), (e, e + 1), shape (N, 3, 16)."""
        e = np.arange(self.N)
        ex = np.concatenate([e, e, e])
        ey = np.concatenate([(e - 1) % self.N, e, (e + 1) % self.N])
        D, Nm = self.engine.touch_pairs(self.geometry[ex], self.geometry[ey])
        return self._combine(D, Nm).reshape(3, self.N, 16).transpose(1, 0, 2).copy()

    # -- element level -----------------------------------------------------------
    def _fill_touching(self, K, touch, ex, ey) -> None:
        i, j = np.nonzero(touch)
        if len(i) == 0:
            return
        off = (ey[j] - ex[i] + 1) % self.N
        if off.max() > 2:
            raise RuntimeError("touching elements that are not neighbours")
        K[i, j] = self._touch[ex[i], off]

    def _block(self, gx, ids_x, gy, ids_y, transpose=False, symmetric=False,
               check_touch=True):
        if self.d_weight == 1.0:
            K, _, KT, _, touch = self.engine.element_block(
                gx, ids_x, gy, ids_y, self.alpha, transpose=transpose, symmetric=symmetric,
                check_touch=check_touch)
        else:
            D, Nm, DT, NT, touch = self.engine.element_block(
                gx, ids_x, gy, ids_y, self.alpha, separate=True, transpose=transpose,
                symmetric=symmetric, check_touch=check_touch)
            K = self._combine(D, Nm)
            KT = self._combine(DT, NT) if transpose else None
        return K, KT, touch

    def element_matrix(self, ex: np.ndarray, ey: np.ndarray, transpose: bool = False):
        """Element matrices (len(ex), len(ey), 16) for Gamma elements.

        With ``transpose`` also returns the (ey test, ex trial) matrices. When
        ``ex`` and ``ey`` are the same array each unordered pair is computed once.
        """
        ex = np.asarray(ex, dtype=np.int_)
        ey = np.asarray(ey, dtype=np.int_)
        symmetric = (not transpose and len(ex) == len(ey) and np.array_equal(ex, ey))
        K, KT, touch = self._block(self.geometry[ex], ex, self.geometry[ey], ey,
                                   transpose=transpose, symmetric=symmetric)
        self._fill_touching(K, touch, ex, ey)
        if transpose:
            self._fill_touching(KT, touch.T, ey, ex)
            return K, KT
        return K

    # -- node level --------------------------------------------------------------
    def _support(self, nodes: np.ndarray):
        """Sorted support elements and, per node, positions of its hat-0 and hat-1 elements."""
        prev = (nodes - 1) % self.N
        elems = np.unique(np.concatenate([nodes, prev]))
        return elems, np.searchsorted(elems, nodes), np.searchsorted(elems, prev)

    def _add_mass(self, out, rows, cols, rmap, cmap) -> None:
        if self.mass_weight == 0.0 or len(rows) == 0 or len(cols) == 0:
            return
        h = self.mesh.lengths
        where = np.full(self.N, -1, dtype=np.int_)
        where[cols] = np.arange(len(cols))
        for k in (-1, 0, 1):
            t = (rows + k) % self.N
            c = where[t]
            r = np.nonzero(c >= 0)[0]
            if len(r) == 0:
                continue
            s, t, c = rows[r], t[r], c[r]
            if k == 0:
                m = (h[(s - 1) % self.N] + h[s]) / 3.0
            elif k == 1:
                m = h[s] / 6.0
            else:
                m = h[t] / 6.0
            m = self.mass_weight * m
            for comp in range(2):
                out[rmap[comp, r], cmap[comp, c]] += m

    def _gather(self, K, rows, cols, pr, pc, out, rmap, cmap):
        gather_nodes(K, pr[0], pr[1], pc[0], pc[1], rmap, cmap, out)
        self._add_mass(out, rows, cols, rmap, cmap)

    def block(self, rows, cols) -> np.ndarray:
        """Galerkin block (2 len(rows), 2 len(cols)) for node index sequences."""
        rows = np.asarray(rows, dtype=np.int_)
        cols = np.asarray(cols, dtype=np.int_)
        out = np.zeros((2 * len(rows), 2 * len(cols)), dtype=complex)
        if len(rows) == 0 or len(cols) == 0:
            return out
        ex, r0, r1 = self._support(rows)
        ey, c0, c1 = self._support(cols)
        K = self.element_matrix(ex, ey)
        self._gather(K, rows, cols, (r0, r1), (c0, c1), out,
                     component_major_map(len(rows)), component_major_map(len(cols)))
        return out

    def block_pair(self, rows, cols) -> tuple[np.ndarray, np.ndarray]:
        """(A[rows, cols], A[cols, rows]) with each element pair integrated once."""
        rows = np.asarray(rows, dtype=np.int_)
        cols = np.asarray(cols, dtype=np.int_)
        a = np.zeros((2 * len(rows), 2 * len(cols)), dtype=complex)
        b = np.zeros((2 * len(cols), 2 * len(rows)), dtype=complex)
        if len(rows) == 0 or len(cols) == 0:
            return a, b
        ex, r0, r1 = self._support(rows)
        ey, c0, c1 = self._support(cols)
        K, KT = self.element_matrix(ex, ey, transpose=True)
        rm, cm = component_major_map(len(rows)), component_major_map(len(cols))
        self._gather(K, rows, cols, (r0, r1), (c0, c1), a, rm, cm)
        self._gather(KT, cols, rows, (c0, c1), (r0, r1), b, cm, rm)
        return a, b

    def dof_block(self, row_dofs, col_dofs) -> np.ndarray:
        """Block over explicit DOF lists; a DOF list is a (comp-0 nodes, comp-1 nodes) pair."""
        rn, rs = dof_union(row_dofs)
        cn, cs = dof_union(col_dofs)
        return self.block(rn, cn)[np.ix_(rs, cs)]

    def dof_block_pair(self, x_rows, x_cols, y_rows, y_cols):
        """(A[x_rows, y_cols], A[y_rows, x_cols]) sharing one set of element pairs."""
        xn = np.union1d(dof_union(x_rows)[0], dof_union(x_cols)[0])
        yn = np.union1d(dof_union(y_rows)[0], dof_union(y_cols)[0])
        a, b = self.block_pair(xn, yn)
        return (a[np.ix_(_positions(xn, x_rows), _positions(yn, y_cols))],
                b[np.ix_(_positions(yn, y_rows), _positions(xn, x_cols))])

    def polygon_blocks(self, poly: Polygon, nodes) -> tuple[np.ndarray, np.ndarray]:
        """Interactions with an auxiliary closed polygon (no identity term).

        Returns (P, Q): P is (2 m, 2 len(nodes)) with polygon hats as tests and
        mesh hats as trials; Q is (2 len(nodes), 2 m) with the roles swapped.
        """
        nodes = np.asarray(nodes, dtype=np.int_)
        m = poly.n_nodes
        P = np.zeros((2 * m, 2 * len(nodes)), dtype=complex)
        Q = np.zeros((2 * len(nodes), 2 * m), dtype=complex)
        if len(nodes) == 0:
            return P, Q
        ey, c0, c1 = self._support(nodes)
        pids = np.arange(m, dtype=np.int_)
        K, KT, _ = self._block(poly.element_geometry(), pids + self.N, self.geometry[ey], ey,
                               transpose=True, check_touch=False)
        p0, p1 = pids, (pids - 1) % m
        pm, cm = component_major_map(m), component_major_map(len(nodes))
        gather_nodes(K, p0, p1, c0, c1, pm, cm, P)
        gather_nodes(KT, c0, c1, p0, p1, cm, pm, Q)
        return P, Q

    # -- dense systems -----------------------------------------------------------
    def dense(self, tree: ClusterTree, budget: float | None = None) -> np.ndarray:
        """Full 2N x 2N matrix in the leaf-ordered layout of :class:`CellLayout`."""
        if tree.N != self.N:
            raise ValueError("tree does not match the mesh")
        budget = DENSE_BUDGET_BYTES if budget is None else budget
        need = 16.0 * (2 * self.N) ** 2
        if need > budget:
            raise MemoryBudgetError(
                f"dense system needs {need / 1e9:.2f} GB, budget is {budget / 1e9:.2f} GB")
        layout = CellLayout(tree)
        A = np.zeros((2 * self.N, 2 * self.N), dtype=complex)
        groups = [np.arange(a, min(a + DENSE_GROUP, self.N))
                  for a in range(0, self.N, DENSE_GROUP)]
        supports = [self._support(g) for g in groups]
        for a, ga in enumerate(groups):
            ex, r0, r1 = supports[a]
            rm = layout.position[:, ga]
            K = self.element_matrix(ex, ex)
            gather_nodes(K, r0, r1, r0, r1, rm, rm, A)
            for b in range(a + 1, len(groups)):
                ey, c0, c1 = supports[b]
                cm = layout.position[:, groups[b]]
                K, KT = self.element_matrix(ex, ey, transpose=True)
                gather_nodes(K, r0, r1, c0, c1, rm, cm, A)
                gather_nodes(KT, c0, c1, r0, r1, cm, rm, A)
        nodes = np.arange(self.N)
        self._add_mass(A, nodes, nodes, layout.position, layout.position)
        return A

    # -- right-hand side ---------------------------------------------------------
    def rhs_nodal(self, wave: IncidentWave, order: int = RHS_ORDER,
                  field=None) -> np.ndarray:
        """Galerkin projection of u^I + alpha t(u^I) on the hats, shape (N, 2).

        ``field(x, n)`` may replace the incident combination (a test hook).
        """
        mesh = self.mesh
        u, w = gauss01(order)
        x = mesh.starts[:, None, :] + (u[None, :, None] * mesh.lengths[:, None, None]
                                       * mesh.tangents[:, None, :])
        n = np.broadcast_to(mesh.normals[:, None, :], x.shape)
        if field is None:
            g = incident_displacement(wave, self.medium, x)
            if self.alpha != 0:
                g = g + self.alpha * incident_traction(wave, self.medium, x, n)
        else:
            g = np.asarray(field(x, n), dtype=complex)
        hw = mesh.lengths[:, None] * w[None, :]
        f0 = np.einsum("eq,eqc->ec", hw * (1.0 - u)[None, :], g)
        f1 = np.einsum("eq,eqc->ec", hw * u[None, :], g)
        return f0 + np.roll(f1, 1, axis=0)

    def rhs_nodal_many(self, waves, order: int = RHS_ORDER) -> np.ndarray:
        """Stacked right-hand sides, shape (N, 2, len(waves))."""
        return np.stack([self.rhs_nodal(w, order) for w in waves], axis=-1)


def default_alpha(medium: ElasticMedium) -> complex:
    return 1j / medium.k_T


def dof_union(dofs) -> tuple[np.ndarray, np.ndarray]:
    """Sorted node union of a (comp-0 nodes, comp-1 nodes) pair and the
    positions of its DOFs in the component-major block over that union."""
    a, b = (np.asarray(d, dtype=np.int_) for d in dofs)
    nodes = np.unique(np.concatenate([a, b]))
    sel = np.concatenate([np.searchsorted(nodes, a), len(nodes) + np.searchsorted(nodes, b)])
    return nodes, sel


def _positions(nodes: np.ndarray, dofs) -> np.ndarray:
    """Rows of DOFs ``dofs`` in a component-major block over sorted ``nodes``."""
    a, b = (np.asarray(d, dtype=np.int_) for d in dofs)
    return np.concatenate([np.searchsorted(nodes, a), len(nodes) + np.searchsorted(nodes, b)])
