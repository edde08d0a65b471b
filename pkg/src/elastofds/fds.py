"""Hierarchical fast direct solver.

Off-diagonal blocks at every level are written A_ij ~= U_i R_ij V_j with
R_ij = A(row skeleton of i, column skeleton of j). Eliminating cell i through
y_i = V_i x_i gives the reduced equations

    Ã_i y_i + sum_j R_ij y_j = f̃_i,   Ã_i = (V_i A_i^-1 U_i)^-1,   f̃_i = Ã_i V_i A_i^-1 f_i,

which pair up into the diagonal blocks of the parent level. After a dense
solve at level ell0 the downward pass recovers

    x_i = A_i^-1 f_i - A_i^-1 U_i (f̃_i - Ã_i y_i).

A_i^-1 is only ever applied through stored LU factors.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve
from threadpoolctl import threadpool_limits

from .assembly import Assembler, default_alpha, pack_block, unpack_block
from .compression import (DEFAULT_PROXY_M, DEFAULT_RADIUS_FACTOR, ProxyBuilder,
                          compress_cell, enclosed_dofs, interaction_matrices,
                          support_elements)
from .geometry import BoundaryMesh, ClusterTree
from .medium import ElasticMedium, IncidentWave, ParameterError


class FactorizationError(RuntimeError):
    """A diagonal block could not be factored."""


@dataclass
class CellFactor:
    cell: int
    level: int
    rows: tuple            # (comp-0 nodes, comp-1 nodes) of the cell's row DOFs
    cols: tuple
    lu: tuple              # LU factors of A_i
    U: np.ndarray
    V: np.ndarray
    Ainv_U: np.ndarray     # A_i^-1 U_i
    A_tilde: np.ndarray
    row_skeleton: tuple    # positions into rows, per component
    col_skeleton: tuple
    rank: int
    raw_ranks: tuple

    @property
    def skeleton_rows(self):
        return tuple(np.asarray(self.rows[c])[self.row_skeleton[c]] for c in range(2))

    @property
    def skeleton_cols(self):
        return tuple(np.asarray(self.cols[c])[self.col_skeleton[c]] for c in range(2))


@dataclass
class Factorization:
    tree: ClusterTree
    ell0: int
    epsilon: float
    cells: dict = field(default_factory=dict)          # cell -> CellFactor
    top_cells: list = field(default_factory=list)
    top_sizes: list = field(default_factory=list)
    top_lu: tuple | None = None
    top_matrix: np.ndarray | None = None                 # kept for residual checks
    times: dict = field(default_factory=dict)

    def ranks(self, level: int) -> list[int]:
        return [self.cells[p].rank for p in self.tree.level_cells(level)]

    @property
    def top_dimension(self) -> int:
        return int(sum(self.top_sizes))


def _interleave(ka: int, kb: int) -> np.ndarray:
    """Parent (component-major) position -> position in [child a block, child b block]."""
    return np.concatenate([np.arange(ka), 2 * ka + np.arange(kb),
                           ka + np.arange(ka), 2 * ka + kb + np.arange(kb)])


def _merge(a: tuple, b: tuple) -> tuple:
    return tuple(np.concatenate([np.asarray(a[c]), np.asarray(b[c])]) for c in range(2))


class FastDirectSolver:
    """Build once with :meth:`factor`, then :meth:`solve` any number of right-hand sides."""

    def __init__(self, mesh: BoundaryMesh, medium: ElasticMedium, levels: int, ell0: int = 1,
                 epsilon: float = 1e-8, alpha: complex | None = None,
                 radius_factor: float = DEFAULT_RADIUS_FACTOR, m_prime: int = DEFAULT_PROXY_M,
                 threads: int = 1, backend: str | None = None,
                 assembler: Assembler | None = None):
        if epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if not 0 <= ell0 <= levels:
            raise ParameterError("need 0 <= ell0 <= L")
        self.mesh = mesh
        self.medium = medium
        self.tree = ClusterTree(mesh.N, levels)
        self.ell0 = int(ell0)
        self.epsilon = float(epsilon)
        self.alpha = default_alpha(medium) if alpha is None else complex(alpha)
        self.threads = max(1, int(threads))
        t0 = time.perf_counter()
        self.asm = assembler or Assembler(mesh, medium, self.alpha, backend=backend, threads=1)
        self.proxies = ProxyBuilder(mesh, radius_factor, m_prime, inward=self.alpha.imag >= 0)
        self.setup_time = time.perf_counter() - t0
        self.factorization: Factorization | None = None

    # -- helpers -----------------------------------------------------------------
    def _map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def _owner(self, dofs: dict) -> np.ndarray:
        owner = np.full((2, self.mesh.N), -1, dtype=np.int_)
        for p, d in dofs.items():
            for c in range(2):
                owner[c, d[c]] = p
        return owner

    def _compress(self, p, level, rows, cols, diag, owner_r, owner_c) -> CellFactor:
        own = support_elements(self.mesh.N, self.tree.indices(p))
        proxy = self.proxies.build(own)
        enc_r = enclosed_dofs(self.mesh.N, proxy, owner_r, p)
        enc_c = enclosed_dofs(self.mesh.N, proxy, owner_c, p)
        MV, MU = interaction_matrices(self.asm, proxy, rows, cols, enc_r, enc_c)
        basis = compress_cell(MV, MU, self.epsilon, p)
        try:
            lu = lu_factor(diag, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise FactorizationError(f"cell {p} at level {level}: {exc}") from exc
        piv = np.abs(np.diag(lu[0]))
        if not np.all(np.isfinite(piv)) or piv.min(initial=np.inf) == 0.0:
            raise FactorizationError(f"cell {p} at level {level}: singular diagonal block")
        W = lu_solve(lu, basis.U, check_finite=False)
        S = basis.V @ W
        k2 = S.shape[0]
        A_tilde = solve(S, np.eye(k2, dtype=complex), check_finite=False) if k2 else S
        return CellFactor(p, level, rows, cols, lu, basis.U, basis.V, W, A_tilde,
                          basis.row_skeleton, basis.col_skeleton, basis.rank, basis.raw_ranks)

    def _parent_block(self, a: CellFactor, b: CellFactor) -> np.ndarray:
        ka, kb = a.rank, b.rank
        M = np.zeros((2 * (ka + kb), 2 * (ka + kb)), dtype=complex)
        M[:2 * ka, :2 * ka] = a.A_tilde
        M[2 * ka:, 2 * ka:] = b.A_tilde
        M[:2 * ka, 2 * ka:], M[2 * ka:, :2 * ka] = self.asm.dof_block_pair(
            a.skeleton_rows, a.skeleton_cols, b.skeleton_rows, b.skeleton_cols)
        perm = _interleave(ka, kb)
        return M[np.ix_(perm, perm)]

    # -- build -------------------------------------------------------------------
    def factor(self) -> Factorization:
        tree, L = self.tree, self.tree.L
        fz = Factorization(tree, self.ell0, self.epsilon)
        times = {"setup": self.setup_time}
        t_all = time.perf_counter()
        with threadpool_limits(limits=1):
            rows = {p: (tree.indices(p), tree.indices(p)) for p in tree.leaves()}
            cols = dict(rows)
            t0 = time.perf_counter()
            diag = dict(zip(tree.leaves(), self._map(
                lambda p: self.asm.block(rows[p][0], cols[p][0]), tree.leaves())))
            times["leaf_blocks"] = time.perf_counter() - t0
            for level in range(L, self.ell0, -1):
                t0 = time.perf_counter()
                cells = list(tree.level_cells(level))
                owner_r = self._owner({p: rows[p] for p in cells})
                owner_c = self._owner({p: cols[p] for p in cells})
                facs = self._map(lambda p: self._compress(p, level, rows[p], cols[p], diag[p],
                                                          owner_r, owner_c), cells)
                for f in facs:
                    fz.cells[f.cell] = f
                    del diag[f.cell]
                parents = list(tree.level_cells(level - 1))
                blocks = self._map(lambda q: self._parent_block(*(fz.cells[c] for c in
                                                                  tree.children(q))), parents)
                for q, blk in zip(parents, blocks):
                    a, b = (fz.cells[c] for c in tree.children(q))
                    rows[q] = _merge(a.skeleton_rows, b.skeleton_rows)
                    cols[q] = _merge(a.skeleton_cols, b.skeleton_cols)
                    diag[q] = blk
                times[f"level_{level}"] = time.perf_counter() - t0
            t0 = time.perf_counter()
            top = list(tree.level_cells(self.ell0))
            sizes = [diag[p].shape[0] for p in top]
            offs = np.concatenate([[0], np.cumsum(sizes)])
            A = np.zeros((offs[-1], offs[-1]), dtype=complex)
            for i, p in enumerate(top):
                A[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] = diag[p]
                for j in range(i + 1, len(top)):
                    q = top[j]
                    (A[offs[i]:offs[i + 1], offs[j]:offs[j + 1]],
                     A[offs[j]:offs[j + 1], offs[i]:offs[i + 1]]) = self.asm.dof_block_pair(
                        rows[p], cols[p], rows[q], cols[q])
            fz.top_matrix = A.copy()
            fz.top_lu = lu_factor(A, overwrite_a=True, check_finite=False)
            if np.abs(np.diag(fz.top_lu[0])).min(initial=np.inf) == 0.0:
                raise FactorizationError("singular top-level system")
            fz.top_cells, fz.top_sizes = top, sizes
            times["top"] = time.perf_counter() - t0
        times["factor_total"] = time.perf_counter() - t_all
        fz.times = times
        self.factorization = fz
        return fz

    # -- solve -------------------------------------------------------------------
    def solve(self, F: np.ndarray) -> np.ndarray:
        """Solve for nodal right-hand sides (N, 2) or (N, 2, m); returns the same shape."""
        fz = self.factorization or self.factor()
        F = np.asarray(F, dtype=complex)
        if F.shape[:2] != (self.mesh.N, 2):
            raise ValueError(f"right-hand side must have shape ({self.mesh.N}, 2[, m])")
        single = F.ndim == 2
        if single:
            F = F[..., None]
        tree, L = self.tree, self.tree.L
        times = {}
        with threadpool_limits(limits=1):
            t0 = time.perf_counter()
            f = {p: pack_block(F[tree.indices(p)]) for p in tree.leaves()}
            g, ft = {}, {}
            for level in range(L, self.ell0, -1):
                for p in tree.level_cells(level):
                    c = fz.cells[p]
                    g[p] = lu_solve(c.lu, f.pop(p), check_finite=False)
                    ft[p] = c.A_tilde @ (c.V @ g[p])
                for q in tree.level_cells(level - 1):
                    a, b = tree.children(q)
                    perm = _interleave(fz.cells[a].rank, fz.cells[b].rank)
                    f[q] = np.vstack([ft[a], ft[b]])[perm]
            t1 = time.perf_counter()
            x = lu_solve(fz.top_lu, np.vstack([f[p] for p in fz.top_cells]), check_finite=False)
            offs = np.concatenate([[0], np.cumsum(fz.top_sizes)])
            xs = {p: x[offs[i]:offs[i + 1]] for i, p in enumerate(fz.top_cells)}
            t2 = time.perf_counter()
            skeleton = {}
            for level in range(self.ell0, L):
                for q in tree.level_cells(level):
                    a, b = tree.children(q)
                    ca, cb = fz.cells[a], fz.cells[b]
                    z = np.empty_like(xs[q])
                    z[_interleave(ca.rank, cb.rank)] = xs.pop(q)
                    for c, y in ((ca, z[:2 * ca.rank]), (cb, z[2 * ca.rank:])):
                        skeleton[c.cell] = y
                        xs[c.cell] = g[c.cell] - c.Ainv_U @ (ft[c.cell] - c.A_tilde @ y)
            out = np.empty_like(F)
            for p in tree.leaves():
                out[tree.indices(p)] = unpack_block(xs[p])
            t3 = time.perf_counter()
        times.update(upward=t1 - t0, top_solve=t2 - t1, downward=t3 - t2)
        self.last_solve_times = times
        self.last_skeleton_solution = skeleton       # y_i = V_i x_i per compressed cell
        return out[..., 0] if single else out

    def rhs(self, waves) -> np.ndarray:
        waves = [waves] if isinstance(waves, IncidentWave) else list(waves)
        return self.asm.rhs_nodal_many(waves)

    def solve_waves(self, waves) -> np.ndarray:
        """Nodal solutions (N, 2, m) for a list of incident waves."""
        return self.solve(self.rhs(waves))
