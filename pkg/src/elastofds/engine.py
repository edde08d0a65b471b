"""Element-pair Galerkin integrals behind one interface, compiled or numpy.

The backend is chosen at import: the Cython extension when it was built,
numpy otherwise. ``ELASTOFDS_BACKEND=numpy`` forces the fallback. Both return
the same element matrices up to rounding; only the compiled one guarantees
bit-identical entries across blocks and thread counts.

Element matrices are complex arrays of shape (..., 16) ordered
[test hat a][trial hat b][component i][component j].
"""

from __future__ import annotations

import os

import numpy as np

from . import pairs
from .kernels import KernelConstants, radial_functions
from .quadrature import gauss01, graded01
from .radial_table import RadialTable, TableRangeError, build_table

try:
    from . import _galerkin
except ImportError:  # pragma: no cover - exercised only without a compiler
    _galerkin = None

MAX_ORDER = 16
REMAINDER_FLOOR = 1e-13     # remainder table starts at this fraction of the shortest element


def _default_backend() -> str:
    forced = os.environ.get("ELASTOFDS_BACKEND", "").strip().lower()
    if forced in ("numpy", "python"):
        return "numpy"
    return "compiled" if _galerkin is not None else "numpy"


BACKEND = _default_backend()


def available_backends() -> list[str]:
    return ["compiled", "numpy"] if _galerkin is not None else ["numpy"]


def _rule_arrays() -> tuple[np.ndarray, np.ndarray]:
    """Gauss rules of orders 1..MAX_ORDER on [0, 1]; row q holds order q."""
    nodes = np.zeros((MAX_ORDER + 1, MAX_ORDER))
    weights = np.zeros_like(nodes)
    for q in range(1, MAX_ORDER + 1):
        u, w = gauss01(q)
        nodes[q, :q] = u
        weights[q, :q] = w
    return nodes, weights


def _flat(m: np.ndarray) -> np.ndarray:
    return m.reshape(m.shape[:-4] + (16,))


class PairEngine:
    """D and N element matrices for a fixed medium.

    ``r_lo``/``r_hi`` bound the distances met by pairs that do not touch;
    ``h_min``/``h_max`` are the extreme element lengths (they set the range of
    the remainder table used for touching pairs).
    """

    def __init__(self, kc: KernelConstants, r_lo: float, r_hi: float, h_min: float,
                 h_max: float, backend: str | None = None, threads: int = 1):
        backend = backend or BACKEND
        if backend not in available_backends():
            raise ValueError(f"backend {backend!r} is not available")
        self.kc = kc
        self.backend = backend
        self.threads = max(1, int(threads))
        self.far_table: RadialTable = build_table(kc, r_lo, r_hi)
        self.rem_table: RadialTable = build_table(kc, REMAINDER_FLOOR * h_min, 3.0 * h_max,
                                                  remainder=True)
        self._ctx = None
        if backend == "compiled":
            g, gw = graded01(pairs.NEAR_OUTER, pairs.GRADE)
            gc, gcw = graded01(pairs.NEAR_INNER, 2)
            gv, gvw = graded01(pairs.NEAR_INNER + 4, pairs.INNER_GRADE)
            go, gow = graded01(pairs.NEAR_OUTER, pairs.INNER_GRADE)
            nodes, weights = _rule_arrays()
            self._ctx = _galerkin.KernelContext(kc, self.far_table, self.rem_table, nodes,
                                                weights, pairs.ORDER_TABLE, (g, gw),
                                                (gc, gcw), (gv, gvw), (go, gow))

    def oscillation_orders(self, geometry: np.ndarray) -> np.ndarray:
        return np.asarray(pairs.oscillation_order(self.kc.k_T * geometry[:, 6]), dtype=np.int32)

    # -- remainder evaluation for the numpy path ---------------------------------
    def _remainder(self, r):
        r = np.asarray(r, dtype=float)
        return self.rem_table.evaluate(np.clip(r, self.rem_table.r_lo, self.rem_table.r_hi))

    def element_block(self, gx: np.ndarray, ids_x: np.ndarray, gy: np.ndarray,
                      ids_y: np.ndarray, alpha: complex, separate: bool = False,
                      transpose: bool = False, symmetric: bool = False,
                      check_touch: bool = True):
        """Matrices for every (X, Y) element pair.

        Returns (K, KN, KT, KTN, touch): K holds D + alpha N (or D with
        ``separate``, N then in KN); KT/KTN are the (Y test, X trial) matrices
        when ``transpose``; ``touch`` flags touching pairs, left at zero.
        """
        gx = np.ascontiguousarray(gx, dtype=float)
        gy = np.ascontiguousarray(gy, dtype=float)
        ids_x = np.ascontiguousarray(ids_x, dtype=np.int_)
        ids_y = np.ascontiguousarray(ids_y, dtype=np.int_)
        ox, oy = self.oscillation_orders(gx), self.oscillation_orders(gy)
        if self.backend == "compiled":
            K, KN, KT, KTN, touch, status = self._ctx.element_block(
                gx, ids_x, ox, gy, ids_y, oy, complex(alpha), separate, transpose, symmetric,
                check_touch, self.threads)
            if status.any():
                raise TableRangeError("element distance outside the radial table")
            return K, KN, KT, KTN, touch.astype(bool)
        return self._element_block_numpy(gx, gy, ox, oy, alpha, separate, transpose,
                                         check_touch)

    def _element_block_numpy(self, gx, gy, ox, oy, alpha, separate, transpose, check_touch):
        nx, ny = len(gx), len(gy)
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        I, J = I.ravel(), J.ravel()
        D = np.zeros((nx * ny, 16), dtype=complex)
        N = np.zeros_like(D)
        touch = np.zeros(nx * ny, dtype=bool)
        if check_touch and nx * ny:
            touch = pairs._classify(gx[I], gy[J])[0] != 0
        far = np.nonzero(~touch)[0]
        step = 20000
        for start in range(0, len(far), step):
            sel = far[start:start + step]
            a, b = gx[I[sel]], gy[J[sel]]
            d = pairs.effective_distance(a, b)
            qx = pairs.gauss_order(d / a[:, 6], ox[I[sel]])
            qy = pairs.gauss_order(d / b[:, 6], oy[J[sel]])
            Dk, Nk = pairs.far_pairs(a, b, self.kc, self.far_table.evaluate, qx, qy)
            D[sel], N[sel] = _flat(Dk), _flat(Nk)
        shape = (nx, ny, 16)
        out = [D.reshape(shape), N.reshape(shape)] if separate else \
            [(D + alpha * N).reshape(shape), None]
        if transpose:
            KT, KTN, _ = self._element_block_numpy(gy, gx, oy, ox, alpha, True, False,
                                                   check_touch)[:3]
            out += [KT, KTN] if separate else [KT + alpha * KTN, None]
        else:
            out += [None, None]
        return (*out, touch.reshape(nx, ny))

    def touch_pairs(self, gx: np.ndarray, gy: np.ndarray):
        """D and N (n, 16) for touching pairs (coincident or sharing a vertex)."""
        gx = np.ascontiguousarray(gx, dtype=float)
        gy = np.ascontiguousarray(gy, dtype=float)
        if self.backend == "compiled":
            D, N, status = self._ctx.touch_pairs(gx, gy, self.threads)
            if (status == 2).any():
                raise ValueError("touch_pairs called on elements that do not touch")
            if status.any():
                raise TableRangeError("touching pair outside the remainder table")
            return D, N
        kind = pairs._classify(gx, gy)[0]
        if (kind == 0).any():
            raise ValueError("touch_pairs called on elements that do not touch")
        D, N = pairs.near_pairs(gx, gy, self.kc, self._remainder)
        return _flat(D), _flat(N)

    def far_pairs(self, gx: np.ndarray, gy: np.ndarray, ids_x=None, ids_y=None):
        """D and N (n, 16) for a list of pairs that do not touch."""
        gx = np.ascontiguousarray(gx, dtype=float)
        gy = np.ascontiguousarray(gy, dtype=float)
        n = len(gx)
        ids_x = np.zeros(n, dtype=np.int_) if ids_x is None else np.ascontiguousarray(ids_x, dtype=np.int_)
        ids_y = np.zeros(n, dtype=np.int_) if ids_y is None else np.ascontiguousarray(ids_y, dtype=np.int_)
        ox, oy = self.oscillation_orders(gx), self.oscillation_orders(gy)
        if self.backend == "compiled":
            D, N, status = self._ctx.far_pairs(gx, gy, ids_x, ids_y, ox, oy, self.threads)
            if status.any():
                raise TableRangeError("element distance outside the radial table")
            return D, N
        d = pairs.effective_distance(gx, gy)
        qx = pairs.gauss_order(d / gx[:, 6], ox)
        qy = pairs.gauss_order(d / gy[:, 6], oy)
        D, N = pairs.far_pairs(gx, gy, self.kc, self.far_table.evaluate, qx, qy)
        return _flat(D), _flat(N)


def direct_evaluator(kc: KernelConstants):
    """Radial functions without a table (reference path for tests)."""
    return lambda r: radial_functions(r, kc)


def gather_nodes(K: np.ndarray, p0, p1, q0, q1, rmap, cmap, out: np.ndarray) -> None:
    """out[rmap[i, r], cmap[j, c]] = sum over hats of element matrices (fixed order).

    Row node r sits on element p0[r] as hat 0 and on p1[r] as hat 1 (indices
    into K's first axis); likewise columns with q0, q1.
    """
    if _galerkin is not None and out.flags.c_contiguous:
        _galerkin.gather_nodes(np.ascontiguousarray(K), *(np.ascontiguousarray(a, dtype=np.int_)
                                                          for a in (p0, p1, q0, q1, rmap, cmap)),
                               out)
        return
    K6 = K.reshape(K.shape[:2] + (2, 2, 2, 2))
    p0, p1, q0, q1 = (np.asarray(a) for a in (p0, p1, q0, q1))
    blk = (((K6[np.ix_(p1, q1)][:, :, 1, 1] + K6[np.ix_(p1, q0)][:, :, 1, 0])
            + K6[np.ix_(p0, q1)][:, :, 0, 1]) + K6[np.ix_(p0, q0)][:, :, 0, 0])
    for i in range(2):
        for j in range(2):
            out[np.ix_(rmap[i], cmap[j])] = blk[:, :, i, j]
