# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Galerkin element-pair integrals and node-level gather.

Element pairs are independent tasks and every unordered pair is integrated
in one canonical orientation, so results do not depend on the thread count
or on which block requested them.
"""

from cython.parallel cimport prange
from libc.string cimport memset

import numpy as np

cdef extern from "galerkin_kernel.h" nogil:
    enum:
        EF_NF
        EF_DEG
        EF_MAXQ
        EF_MAXORD
        EF_MAXRULE
    ctypedef struct ef_table:
        const double *coeffs
        int n_int
        double w_min, width, r_c, log_rc, r_lo, r_hi
        int clamp
    ctypedef struct ef_ctx:
        ef_table far
        ef_table rem
        double mu, kappa, rho_omega2
        double log_coeff_g, rr_coeff_g, k1_coeff
        int is_static
        const double *gnodes
        const double *gweights
        int n_orders
        double order_bound[16]
        int order_q[16]
        int n_outer
        const double *outer_g
        const double *outer_w
        const double *outer_c_g
        const double *outer_c_w
        int n_inner_c
        const double *inner_c_g
        const double *inner_c_w
        int n_inner_v
        const double *inner_v_g
        const double *inner_v_w
    int ef_block_row(const ef_ctx *c, long i, long nx, const double *GX, const long *idx,
                     const int *oscx, long ny, const double *GY, const long *idy,
                     const int *oscy, double alpha_re, double alpha_im, int separate,
                     int symmetric, int check_touch, double *K, double *KN, double *KT,
                     double *KTN, unsigned char *touch)
    int ef_touch_one(const ef_ctx *c, const double *gx, const double *gy, double *D, double *N)
    int ef_far_one(const ef_ctx *c, const double *gx, const double *gy, long idx, long idy,
                   int oscx, int oscy, double *D, double *N)
    void ef_gather_rows(const double *K, long ney, long nr, const long *p0, const long *p1,
                        long nc, const long *q0, const long *q1, const long *rmap,
                        const long *cmap, double *out, long ld)


# table columns used by the kernel: phi_T, phi_L, phi_T', Df, g1, g2 (re, im)
PACKED_COLUMNS = (0, 1, 2, 3, 4, 5, 8, 9, 10, 11, 12, 13)
MAX_ORDER = EF_MAXQ
MAX_RULE = EF_MAXRULE


cdef void _set_table(ef_table *t, object table, const double[:, :, ::1] packed, int clamp):
    t.coeffs = &packed[0, 0, 0]
    t.n_int = <int>packed.shape[0]
    t.w_min = table.w_min
    t.width = table.width
    t.r_c = table.r_c
    t.log_rc = table.log_rc
    t.r_lo = table.r_lo
    t.r_hi = table.r_hi
    t.clamp = clamp


cdef class KernelContext:
    """Constants, radial tables and quadrature rules shared by all pair integrals."""

    cdef ef_ctx c
    cdef object _keep

    def __init__(self, kc, far_table, rem_table, gauss_nodes, gauss_weights, order_table,
                 outer_rule, inner_coincident, inner_vertex, outer_coincident):
        far_packed = np.ascontiguousarray(far_table.coeffs[:, :, list(PACKED_COLUMNS)])
        rem_packed = np.ascontiguousarray(rem_table.coeffs[:, :, list(PACKED_COLUMNS)])
        if far_packed.shape[1] != EF_DEG or far_packed.shape[2] != EF_NF:
            raise ValueError("unexpected radial table layout")
        gn = np.ascontiguousarray(gauss_nodes, dtype=float)
        gw = np.ascontiguousarray(gauss_weights, dtype=float)
        if gn.shape != (EF_MAXQ + 1, EF_MAXQ):
            raise ValueError("unexpected Gauss rule layout")
        rules = [np.ascontiguousarray(a, dtype=float) for pair in
                 (outer_rule, inner_coincident, inner_vertex, outer_coincident) for a in pair]
        if len(rules[6]) != len(rules[0]):
            raise ValueError("outer rules must have equal length")
        if len(rules[0]) > EF_MAXRULE or 2 * len(rules[2]) > EF_MAXRULE or len(rules[4]) > EF_MAXRULE:
            raise ValueError("touching-pair rule too long")
        if len(order_table) > EF_MAXORD:
            raise ValueError("order table too long")
        self._keep = (far_packed, rem_packed, gn, gw, rules)
        _set_table(&self.c.far, far_table, far_packed, 0)
        _set_table(&self.c.rem, rem_table, rem_packed, 1)
        self.c.mu = kc.mu
        self.c.kappa = kc.kappa
        self.c.rho_omega2 = kc.rho_omega2
        self.c.log_coeff_g = kc.log_coeff_g
        self.c.rr_coeff_g = kc.rr_coeff_g
        self.c.k1_coeff = kc.k1_coeff
        self.c.is_static = 1 if kc.static else 0
        cdef const double[:, ::1] gnv = gn
        cdef const double[:, ::1] gwv = gw
        self.c.gnodes = &gnv[0, 0]
        self.c.gweights = &gwv[0, 0]
        self.c.n_orders = len(order_table)
        for k, (bound, q) in enumerate(order_table):
            if not 1 <= q <= EF_MAXQ:
                raise ValueError("Gauss order out of range")
            self.c.order_bound[k] = min(float(bound), 1e300)
            self.c.order_q[k] = q
        cdef const double[::1] v
        v = rules[0]; self.c.outer_g = &v[0]
        v = rules[1]; self.c.outer_w = &v[0]
        self.c.n_outer = len(rules[0])
        v = rules[2]; self.c.inner_c_g = &v[0]
        v = rules[3]; self.c.inner_c_w = &v[0]
        self.c.n_inner_c = len(rules[2])
        v = rules[4]; self.c.inner_v_g = &v[0]
        v = rules[5]; self.c.inner_v_w = &v[0]
        self.c.n_inner_v = len(rules[4])
        v = rules[6]; self.c.outer_c_g = &v[0]
        v = rules[7]; self.c.outer_c_w = &v[0]

    def element_block(self, const double[:, ::1] GX, const long[::1] idx, const int[::1] oscx,
                      const double[:, ::1] GY, const long[::1] idy, const int[::1] oscy,
                      double complex alpha, bint separate=False, bint transpose=False,
                      bint symmetric=False, bint check_touch=True, int threads=1):
        """Element matrices for all pairs of X and Y elements.

        Returns ``(K, KN, KT, KTN, touch, status)``. ``K`` is (nx, ny, 16) complex
        holding D + alpha N, or D alone with ``separate`` (N then in ``KN``).
        ``transpose`` also returns the (Y test, X trial) matrices. With
        ``symmetric`` X and Y must be the same list and each unordered pair is
        integrated once. Touching pairs are left at zero and flagged.
        """
        cdef Py_ssize_t nx = GX.shape[0], ny = GY.shape[0], i
        if GX.shape[1] != 8 or GY.shape[1] != 8:
            raise ValueError("geometry rows must have 8 columns")
        if idx.shape[0] != nx or oscx.shape[0] != nx or idy.shape[0] != ny or oscy.shape[0] != ny:
            raise ValueError("id and order arrays must match the geometry")
        if symmetric and (nx != ny or transpose):
            raise ValueError("symmetric mode needs one list and no transpose")
        K = np.zeros((nx, ny, 16), dtype=complex)
        KN = np.zeros((nx, ny, 16), dtype=complex) if separate else None
        KT = np.zeros((ny, nx, 16), dtype=complex) if transpose else None
        KTN = np.zeros((ny, nx, 16), dtype=complex) if (transpose and separate) else None
        touch = np.zeros((nx, ny), dtype=np.uint8)
        status = np.zeros(nx, dtype=np.int32)
        if nx == 0 or ny == 0:
            return K, KN, KT, KTN, touch, status
        cdef double *pK = _ptr(K)
        cdef double *pKN = _ptr(KN)
        cdef double *pKT = _ptr(KT)
        cdef double *pKTN = _ptr(KTN)
        cdef unsigned char[:, ::1] tv = touch
        cdef int[::1] sv = status
        cdef double are = alpha.real, aim = alpha.imag
        cdef int sep = separate, sym = symmetric, chk = check_touch
        for i in prange(nx, nogil=True, num_threads=threads, schedule="dynamic"):
            sv[i] = ef_block_row(&self.c, i, nx, &GX[0, 0], &idx[0], &oscx[0], ny, &GY[0, 0],
                                 &idy[0], &oscy[0], are, aim, sep, sym, chk, pK, pKN, pKT,
                                 pKTN, &tv[0, 0])
        return K, KN, KT, KTN, touch, status

    def touch_pairs(self, const double[:, ::1] GX, const double[:, ::1] GY, int threads=1):
        """D and N (n, 16) for touching pairs; status 2 marks pairs that do not touch."""
        cdef Py_ssize_t n = GX.shape[0], i
        if GY.shape[0] != n:
            raise ValueError("pair arrays differ in length")
        D = np.zeros((n, 16), dtype=complex)
        N = np.zeros((n, 16), dtype=complex)
        status = np.zeros(n, dtype=np.int32)
        if n == 0:
            return D, N, status
        cdef double *pD = _ptr(D)
        cdef double *pN = _ptr(N)
        cdef int[::1] sv = status
        for i in prange(n, nogil=True, num_threads=threads, schedule="dynamic"):
            sv[i] = ef_touch_one(&self.c, &GX[i, 0], &GY[i, 0], pD + 32 * i, pN + 32 * i)
        return D, N, status

    def far_pairs(self, const double[:, ::1] GX, const double[:, ::1] GY,
                  const long[::1] idx, const long[::1] idy, const int[::1] oscx,
                  const int[::1] oscy, int threads=1):
        """D and N (n, 16) for a list of pairs that do not touch."""
        cdef Py_ssize_t n = GX.shape[0], i
        if GY.shape[0] != n or idx.shape[0] != n or idy.shape[0] != n:
            raise ValueError("pair arrays differ in length")
        D = np.zeros((n, 16), dtype=complex)
        N = np.zeros((n, 16), dtype=complex)
        status = np.zeros(n, dtype=np.int32)
        if n == 0:
            return D, N, status
        cdef double *pD = _ptr(D)
        cdef double *pN = _ptr(N)
        cdef int[::1] sv = status
        for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
            sv[i] = ef_far_one(&self.c, &GX[i, 0], &GY[i, 0], idx[i], idy[i], oscx[i], oscy[i],
                               pD + 32 * i, pN + 32 * i)
        return D, N, status


cdef double *_ptr(object arr):
    """Data pointer of a C-contiguous complex array (NULL for None or empty)."""
    if arr is None or arr.size == 0:
        return NULL
    cdef double[::1] flat = arr.reshape(-1).view(np.float64)
    return &flat[0]


def gather_nodes(K, const long[::1] p0, const long[::1] p1, const long[::1] q0,
                 const long[::1] q1, const long[:, ::1] rmap, const long[:, ::1] cmap, out):
    """Sum element matrices into node entries of ``out`` (see ``ef_gather_row``).

    ``K`` is (nex, ney, 16) complex; ``rmap`` (2, nrows) and ``cmap`` (2, ncols)
    give the output row/column of each (component, node); ``out`` is a
    C-contiguous complex matrix.
    """
    cdef Py_ssize_t nr = p0.shape[0], nc = q0.shape[0]
    if K.ndim != 3 or K.shape[2] != 16 or p1.shape[0] != nr or q1.shape[0] != nc:
        raise ValueError("inconsistent gather arguments")
    if rmap.shape[0] != 2 or rmap.shape[1] != nr or cmap.shape[0] != 2 or cmap.shape[1] != nc:
        raise ValueError("inconsistent gather maps")
    if not (K.flags.c_contiguous and out.flags.c_contiguous and K.dtype == np.complex128
            and out.dtype == np.complex128 and out.ndim == 2):
        raise ValueError("gather needs C-contiguous complex arrays")
    if nr == 0 or nc == 0:
        return
    cdef long ney = K.shape[1], ld = out.shape[1]
    cdef double *pK = _ptr(K)
    cdef double *pO = _ptr(out)
    with nogil:
        ef_gather_rows(pK, ney, nr, &p0[0], &p1[0], nc, &q0[0], &q1[0], &rmap[0, 0],
                       &cmap[0, 0], pO, ld)
