"""Proxy circles and interpolative decompositions giving per-cell bases U_i, V_i.

A cell's unknowns are a DOF list: a pair (comp-0 nodes, comp-1 nodes) of equal
length, laid out component-major. Row and column skeletons are kept apart; the
two component halves are decomposed separately and padded to one shared rank
so that U_i and V_i stay block diagonal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.spatial import cKDTree

from .assembly import Assembler, dof_union
from .geometry import Polygon
from .medium import ParameterError

DEFAULT_RADIUS_FACTOR = 1.5
DEFAULT_PROXY_M = 64


class NoCompressionWarning(RuntimeWarning):
    """A cell's rank reached its size, so it was not compressed."""


# ---------------------------------------------------------------------------
# interpolative decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterpolativeDecomposition:
    """M ~= M[:, skeleton] @ coeff with coeff[:, skeleton] = I."""

    skeleton: np.ndarray
    coeff: np.ndarray
    epsilon: float

    @property
    def rank(self) -> int:
        return len(self.skeleton)


class PivotedQR:
    """Column-pivoted QR of M, keeping R and the pivot order for IDs of any rank."""

    def __init__(self, M: np.ndarray):
        M = np.asarray(M)
        if M.ndim != 2:
            raise ValueError("ID needs a matrix")
        self.shape = M.shape
        if M.size == 0:
            self.R = np.zeros((0, M.shape[1]), dtype=M.dtype)
            self.piv = np.arange(M.shape[1])
        else:
            self.R, self.piv = qr(M, mode="r", pivoting=True, check_finite=False)
        self.diag = np.abs(np.diag(self.R))

    @property
    def max_rank(self) -> int:
        return min(self.shape)

    def rank(self, epsilon: float) -> int:
        """Smallest k with |R[k, k]| <= epsilon |R[0, 0]| (0-based), else full rank."""
        if epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        d = self.diag
        if d.size == 0 or d[0] == 0.0:
            return 0
        small = np.nonzero(d <= epsilon * d[0])[0]
        return int(small[0]) if small.size else len(d)

    def decomposition(self, k: int, epsilon: float) -> InterpolativeDecomposition:
        n = self.shape[1]
        k = min(int(k), self.max_rank)
        coeff = np.zeros((k, n), dtype=np.result_type(self.R.dtype, float))
        skel = self.piv[:k]
        coeff[:, skel] = np.eye(k)
        if 0 < k < n:
            R1, R2 = self.R[:k, :k], self.R[:k, k:]
            try:
                T = solve_triangular(R1, R2, check_finite=False)
            except np.linalg.LinAlgError:           # padded past the numerical rank
                T = None
            if T is None or not np.all(np.isfinite(T)):
                T = np.linalg.lstsq(R1, R2, rcond=None)[0]
            coeff[:, self.piv[k:]] = T
        return InterpolativeDecomposition(np.asarray(skel, dtype=np.int_), coeff, epsilon)


def interpolative_decompose(M: np.ndarray, epsilon: float,
                            rank: int | None = None) -> InterpolativeDecomposition:
    """Column ID by pivoted QR with the dynamic rank rule (or a forced ``rank``)."""
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    M = np.asarray(M)
    if M.size == 0:
        raise ParameterError("ID needs a nonempty matrix")
    f = PivotedQR(M)
    return f.decomposition(f.rank(epsilon) if rank is None else rank, epsilon)


# ---------------------------------------------------------------------------
# proxy circle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProxySurface:
    center: np.ndarray
    radius: float
    polygon: Polygon
    enclosed_elements: np.ndarray      # Gamma elements meeting the disc, the cell's own excluded
    disc_elements: np.ndarray          # all Gamma elements meeting the disc

    @property
    def m_prime(self) -> int:
        return self.polygon.n_nodes


def circle_polygon(center, radius: float, m: int, inward: bool = True) -> Polygon:
    theta = 2 * np.pi * np.arange(m) / m
    nodes = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center)
    poly = Polygon(nodes)              # counter-clockwise: default normals point inward
    if not inward:
        poly = Polygon(nodes, -poly.normals)
    return poly


def support_elements(N: int, nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int_)
    return np.unique(np.concatenate([nodes, (nodes - 1) % N]))


def _segment_distance(mesh, elements, point) -> np.ndarray:
    rel = point[None, :] - mesh.starts[elements]
    s = np.clip(np.einsum("ec,ec->e", rel, mesh.tangents[elements]), 0.0, mesh.lengths[elements])
    foot = mesh.starts[elements] + s[:, None] * mesh.tangents[elements]
    return np.hypot(*(point[None, :] - foot).T)


class ProxyBuilder:
    """Builds proxy circles and finds mesh elements inside them."""

    def __init__(self, mesh, radius_factor: float = DEFAULT_RADIUS_FACTOR,
                 m_prime: int = DEFAULT_PROXY_M, inward: bool = True):
        if not radius_factor > 1.0:
            raise ParameterError("proxy radius factor must exceed 1")
        if m_prime < 3:
            raise ParameterError("proxy needs at least three elements")
        self.mesh = mesh
        self.radius_factor = float(radius_factor)
        self.m_prime = int(m_prime)
        self.inward = inward
        self._tree = cKDTree(mesh.midpoints)
        self._half = 0.5 * float(mesh.lengths.max())

    def build(self, own_elements) -> ProxySurface:
        """Circle about the bounding box of ``own_elements`` (the cell's Gamma_i)."""
        own = np.asarray(own_elements, dtype=np.int_)
        if own.size == 0:
            raise ParameterError("proxy needs a nonempty cell")
        pts = np.concatenate([self.mesh.starts[own], self.mesh.ends[own]])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = self.radius_factor * 0.5 * float(np.hypot(*(hi - lo)))
        cand = np.array(sorted(self._tree.query_ball_point(center, radius + self._half)),
                        dtype=np.int_)
        if cand.size:
            cand = cand[_segment_distance(self.mesh, cand, center) < radius]
        disc = np.union1d(cand, own)
        return ProxySurface(center, radius,
                            circle_polygon(center, radius, self.m_prime, self.inward),
                            np.setdiff1d(cand, own), disc)


def enclosed_dofs(N: int, proxy: ProxySurface, owner: np.ndarray, cell: int):
    """DOFs of other cells whose hat support meets the proxy disc.

    ``owner[c, s]`` is the cell holding (node s, component c) at this level, or -1.
    """
    el = proxy.disc_elements
    touched = np.zeros(N, dtype=bool)
    touched[el] = True
    touched[(el + 1) % N] = True
    out = []
    for c in range(2):
        o = owner[c]
        out.append(np.nonzero(touched & (o >= 0) & (o != cell))[0])
    return tuple(out)


def enclosed_dofs_from_disc(mesh, center, radius, owner, cell):
    """Same as :func:`enclosed_dofs` with an explicit disc (test helper)."""
    e = np.arange(mesh.n_elements)
    inside = e[_segment_distance(mesh, e, np.asarray(center, dtype=float)) < radius]
    fake = ProxySurface(np.asarray(center), radius, None, inside, inside)
    return enclosed_dofs(mesh.n_nodes, fake, owner, cell)


# ---------------------------------------------------------------------------
# cell bases
# ---------------------------------------------------------------------------

@dataclass
class CellBasis:
    """U (2m x 2k), V (2k x 2m) and skeleton positions per component."""

    U: np.ndarray
    V: np.ndarray
    row_skeleton: tuple[np.ndarray, np.ndarray]
    col_skeleton: tuple[np.ndarray, np.ndarray]
    rank: int
    raw_ranks: tuple[int, int, int, int]

    def row_dofs(self, rows):
        return tuple(np.asarray(rows[c])[self.row_skeleton[c]] for c in range(2))

    def col_dofs(self, cols):
        return tuple(np.asarray(cols[c])[self.col_skeleton[c]] for c in range(2))


def polygon_dof_blocks(asm: Assembler, poly: Polygon, rows, cols):
    """(proxy tests x col DOFs, row DOFs x proxy trials)."""
    cn, cs = dof_union(cols)
    rn, rs = dof_union(rows)
    if np.array_equal(cn, rn):
        P, Q = asm.polygon_blocks(poly, cn)
        return P[:, cs], Q[rs, :]
    P, _ = asm.polygon_blocks(poly, cn)
    _, Q = asm.polygon_blocks(poly, rn)
    return P[:, cs], Q[rs, :]


def interaction_matrices(asm: Assembler, proxy: ProxySurface, rows, cols,
                         enclosed_rows, enclosed_cols):
    """M^V (proxy tests and enclosed rows against the cell's columns) and
    M^U (the cell's rows against proxy trials and enclosed columns)."""
    P, Q = polygon_dof_blocks(asm, proxy.polygon, rows, cols)
    MV, MU = [P], [Q]
    has_r = sum(len(e) for e in enclosed_rows) > 0
    has_c = sum(len(e) for e in enclosed_cols) > 0
    if has_r and has_c:
        er, ec = asm.dof_block_pair(enclosed_rows, enclosed_cols, rows, cols)
        MV.append(er)
        MU.append(ec)
    elif has_r:
        MV.append(asm.dof_block(enclosed_rows, cols))
    elif has_c:
        MU.append(asm.dof_block(rows, enclosed_cols))
    return np.vstack(MV), np.hstack(MU)


def block_diag2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]),
                   dtype=np.result_type(a, b))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def compress_cell(MV: np.ndarray, MU: np.ndarray, epsilon: float, cell: int = -1) -> CellBasis:
    """Per-component IDs of M^V (columns) and M^U (rows, via the conjugate transpose)."""
    m = MV.shape[1] // 2
    if MV.shape[1] != 2 * m or MU.shape[0] != 2 * m:
        raise ValueError("interaction matrices do not match the cell size")
    factors = [PivotedQR(MV[:, :m]), PivotedQR(MV[:, m:]),
               PivotedQR(MU[:m, :].conj().T), PivotedQR(MU[m:, :].conj().T)]
    raw = tuple(f.rank(epsilon) for f in factors)
    k = min(max(raw), min(f.max_rank for f in factors))
    if k >= m:
        warnings.warn(f"cell {cell}: rank {k} reached the cell size {m}; not compressed",
                      NoCompressionWarning, stacklevel=2)
    ids = [f.decomposition(k, epsilon) for f in factors]
    V = block_diag2(ids[0].coeff, ids[1].coeff)
    U = block_diag2(ids[2].coeff.conj().T, ids[3].coeff.conj().T)
    return CellBasis(U, V, (ids[2].skeleton, ids[3].skeleton),
                     (ids[0].skeleton, ids[1].skeleton), k, raw)
