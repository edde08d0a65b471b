"""Galerkin element-pair integrals of the double-layer and hypersingular forms.

For a test element X and a trial element Y the routines return arrays
``D[a, b, i, j]`` and ``N[a, b, i, j]``: local test node a, local trial node b,
field component i, density component j.

Far pairs use tensor Gauss rules whose order depends on distance / length.
Near pairs (coincident, sharing a vertex, or closer than two element lengths)
split every kernel into its Kelvin singular part, integrated analytically over
the trial segment and by graded Gauss over the test segment, and a bounded
dynamic remainder integrated by graded tensor rules.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import E_ROT, TWO_PI, KernelConstants, galerkin_integrands
from .quadrature import composite01, gauss01, graded01, split_graded

NEAR_FACTOR = 2.0
# (upper bound of distance / element length, Gauss order); pairs closer than
# one length that do not touch still get plain Gauss rules
ORDER_TABLE = ((0.5, 16), (1.5, 10), (4.0, 8), (8.0, 6), (16.0, 5), (40.0, 4),
               (250.0, 3), (math.inf, 2))
CHUNK_POINTS = 400_000

# geometry columns
_P0, _E, _N, _H, _TS = slice(0, 2), slice(2, 4), slice(4, 6), 6, 7


def effective_distance(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Lower bound of the distance between segments (center distance minus half lengths)."""
    cx = gx[..., _P0] + 0.5 * gx[..., _H, None] * gx[..., _E]
    cy = gy[..., _P0] + 0.5 * gy[..., _H, None] * gy[..., _E]
    d = np.hypot(cx[..., 0] - cy[..., 0], cx[..., 1] - cy[..., 1])
    return d - 0.5 * (gx[..., _H] + gy[..., _H])


OSC_TOL = 1e-16


def oscillation_order(kh):
    """Smallest Gauss order resolving exp(i k s) over a length h to OSC_TOL.

    Accepts a scalar or an array of k h values.
    """
    x = 0.5 * np.asarray(kh, dtype=float)
    out = np.full(x.shape, 12, dtype=np.int64)
    for q in range(12, 1, -1):
        out[x ** (2 * q) / math.factorial(2 * q) <= OSC_TOL] = q
    return int(out) if out.ndim == 0 else out


def gauss_order(ratio: np.ndarray, floor=2) -> np.ndarray:
    """Gauss order from distance / length, never below ``floor`` (scalar or array)."""
    ratio = np.asarray(ratio)
    out = np.full(ratio.shape, ORDER_TABLE[-1][1], dtype=np.int64)
    for bound, order in reversed(ORDER_TABLE):
        out[ratio < bound] = order
    return np.maximum(out, floor)


def is_near(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    hmax = np.maximum(gx[..., _H], gy[..., _H])
    return effective_distance(gx, gy) < NEAR_FACTOR * hmax


def _shape_derivs(g: np.ndarray) -> np.ndarray:
    """Tangential derivatives of the two local hats, shape (n, 2)."""
    d = g[:, _TS] / g[:, _H]
    return np.stack([-d, d], axis=1)


# ---------------------------------------------------------------------------
# far pairs
# ---------------------------------------------------------------------------

def far_pairs(gx: np.ndarray, gy: np.ndarray, kc: KernelConstants, evaluate,
              order_x: np.ndarray | None = None, order_y: np.ndarray | None = None):
    """Tensor Gauss integrals for pairs gx[k], gy[k] (each (n, 8)).

    ``evaluate(r)`` returns the radial values (table or direct evaluation).
    """
    n = len(gx)
    D = np.zeros((n, 2, 2, 2, 2), dtype=complex)
    N = np.zeros((n, 2, 2, 2, 2), dtype=complex)
    if n == 0:
        return D, N
    d = effective_distance(gx, gy)
    if order_x is None:
        order_x = gauss_order(d / gx[:, _H], oscillation_order(kc.k_T * gx[:, _H]))
    if order_y is None:
        order_y = gauss_order(d / gy[:, _H], oscillation_order(kc.k_T * gy[:, _H]))
    key = order_x * 64 + order_y
    for k in np.unique(key):
        sel = np.nonzero(key == k)[0]
        qx, qy = int(k // 64), int(k % 64)
        step = max(1, CHUNK_POINTS // (qx * qy))
        for start in range(0, len(sel), step):
            idx = sel[start:start + step]
            ux, wx = gauss01(qx)
            uy, wy = gauss01(qy)
            Dk, Nk = _tensor_integrals(gx[idx], gy[idx], ux, wx, uy, wy, kc, evaluate)
            D[idx] = Dk
            N[idx] = Nk
    return D, N


def _tensor_integrals(gx, gy, ux, wx, uy, wy, kc, evaluate, remainder=False):
    """Integrals over the tensor rule (ux, wx) x (uy, wy) on [0,1]^2 (shared by all pairs)."""
    hx, hy = gx[:, _H], gy[:, _H]
    xs = gx[:, None, _P0] + (ux[None, :, None] * hx[:, None, None]) * gx[:, None, _E]
    ys = gy[:, None, _P0] + (uy[None, :, None] * hy[:, None, None]) * gy[:, None, _E]
    z = xs[:, :, None, :] - ys[:, None, :, :]
    r = np.hypot(z[..., 0], z[..., 1])
    rv = evaluate(r)
    nx = gx[:, None, None, _N]
    ny = gy[:, None, None, _N]
    it = galerkin_integrands(kc, z, nx, ny, rv=rv)
    Na = np.stack([1.0 - ux, ux], axis=1) * wx[:, None]      # (qx, 2)
    Nb = np.stack([1.0 - uy, uy], axis=1) * wy[:, None]
    scale = (hx * hy)[:, None, None, None, None]
    dA = _shape_derivs(gx)
    dB = _shape_derivs(gy)
    ab = lambda m: np.einsum("pa,qb,npqij->nabij", Na, Nb, m, optimize=True)
    a_only = lambda m: np.einsum("pa,q,npqij->naij", Na, wy, m, optimize=True)
    b_only = lambda m: np.einsum("p,qb,npqij->nbij", wx, Nb, m, optimize=True)
    full = lambda m: np.einsum("p,q,npqij->nij", wx, wy, m, optimize=True)
    D = ab(it.d12) + a_only(it.d3)[:, :, None] * dB[:, None, :, None, None]
    N = (ab(it.n1)
         + full(it.n2)[:, None, None] * (dA[:, :, None] * dB[:, None, :])[..., None, None]
         + a_only(it.n3)[:, :, None] * dB[:, None, :, None, None]
         + b_only(it.n4)[:, None, :] * dA[:, :, None, None, None])
    return D * scale, N * scale


# ---------------------------------------------------------------------------
# near pairs
# ---------------------------------------------------------------------------

_TINY = 1e-300


def _segment_moments(xp: np.ndarray, gy: np.ndarray):
    """Analytic integrals over the trial segment for points xp (n, p, 2).

    Returns, for trial hats b = 0, 1: log r (n,p,b), zz^T/r^2 (n,p,b,2,2) and
    z/r^2 (n,p,b,2), each integrated against the hat over the segment.
    """
    P0 = gy[:, None, _P0]
    e = gy[:, None, _E]
    nv = e @ E_ROT.T
    h = gy[:, _H][:, None]
    w = xp - P0
    a = (w * e).sum(-1)
    b = (w * nv).sum(-1)
    # points on the trial line: the jump term of the angle must vanish
    b = np.where(np.abs(b) <= 1e-13 * h, 0.0, b)
    u2, u1 = a, a - h
    b2 = b * b
    q2 = u2 * u2 + b2
    q1 = u1 * u1 + b2
    lg2 = np.log(np.maximum(q2, _TINY))
    lg1 = np.log(np.maximum(q1, _TINY))
    theta = np.sign(b) * np.arctan2(np.abs(b) * (u2 - u1), b2 + u1 * u2)
    log0 = 0.5 * (u2 * lg2 - u1 * lg1) - (u2 - u1) + b * theta
    log1u = 0.25 * ((q2 * lg2 - u2 * u2) - (q1 * lg1 - u1 * u1))
    lnr = 0.5 * (lg2 - lg1)
    puu0 = (u2 - u1) - b * theta
    u3 = 0.5 * (u2 * u2 - u1 * u1) - 0.5 * b2 * (lg2 - lg1)
    moments = {
        "log": (log0, a * log0 - log1u),
        "uu": (puu0, a * puu0 - u3),
        "ub": (b * lnr, a * b * lnr - b * puu0),
        "bb": (b * theta, a * b * theta - b2 * lnr),
        "vu": (lnr, a * lnr - puu0),
        "vb": (theta, a * theta - b * lnr),
    }
    hats = {}
    for key, (m0, m1) in moments.items():
        hats[key] = np.stack([m0 - m1 / h, m1 / h], axis=-1)      # (n, p, b)
    ee = e[..., :, None] * e[..., None, :]
    en = e[..., :, None] * nv[..., None, :]
    nn = nv[..., :, None] * nv[..., None, :]
    srr = (hats["uu"][..., None, None] * ee[:, :, None]
           + hats["ub"][..., None, None] * (en + np.swapaxes(en, -1, -2))[:, :, None]
           + hats["bb"][..., None, None] * nn[:, :, None])
    zr = hats["vu"][..., None] * e[:, :, None] + hats["vb"][..., None] * nv[:, :, None]
    return hats["log"], srr, zr


def _classify(gx: np.ndarray, gy: np.ndarray):
    """Return kind (0 generic, 1 coincident, 2 vertex) and vertex parameters."""
    hx, hy = gx[:, _H], gy[:, _H]
    x0, y0 = gx[:, _P0], gy[:, _P0]
    x1 = x0 + hx[:, None] * gx[:, _E]
    y1 = y0 + hy[:, None] * gy[:, _E]
    tol = 1e-10 * np.maximum(hx, hy)
    close = lambda p, q: np.hypot(p[:, 0] - q[:, 0], p[:, 1] - q[:, 1]) <= tol
    kind = np.zeros(len(gx), dtype=np.int64)
    sv = np.zeros(len(gx))
    tv = np.zeros(len(gx))
    coinc = close(x0, y0) & close(x1, y1)
    for cond, s_at, t_at in ((close(x1, y0), 1.0, 0.0), (close(x0, y1), 0.0, 1.0),
                             (close(x0, y0), 0.0, 0.0), (close(x1, y1), 1.0, 1.0)):
        hit = cond & ~coinc & (kind == 0)
        kind[hit] = 2
        sv[hit] = s_at
        tv[hit] = t_at
    kind[coinc] = 1
    return kind, sv, tv


NEAR_OUTER = 14
NEAR_INNER = 10
GRADE = 5          # outer rule toward a shared vertex
INNER_GRADE = 3    # other graded rules; stronger grading there collides points


def _outer_rule(kind: int, sv: np.ndarray, n: int | None = None):
    """Outer nodes/weights on [0,1] per pair, shape (npairs, p)."""
    n = NEAR_OUTER if n is None else n
    m = len(sv)
    if kind == 1:
        g, wg = graded01(n, INNER_GRADE)
        u = np.concatenate([0.5 * g, 1.0 - 0.5 * g])
        w = np.concatenate([0.5 * wg, 0.5 * wg])
        return np.broadcast_to(u, (m, len(u))), np.broadcast_to(w, (m, len(u)))
    if kind == 2:
        g, wg = graded01(n, GRADE)
        u = np.where(sv[:, None] == 0.0, g[None, :], 1.0 - g[None, :])
        return u, np.broadcast_to(wg, u.shape)
    u, w = composite01(n // 2 + 2, 3)
    return np.broadcast_to(u, (m, len(u))), np.broadcast_to(w, (m, len(u)))


def _inner_rule(kind: int, up: np.ndarray, tv: np.ndarray, n: int | None = None):
    """Inner nodes/weights on [0,1], shape (npairs, p, q)."""
    n = NEAR_INNER if n is None else n
    m, p = up.shape
    if kind == 1:
        t, w = split_graded(up, n, 2)
        return t, w
    if kind == 2:
        g, wg = graded01(n + 4, INNER_GRADE)
        t = np.where(tv[:, None] == 0.0, g[None, :], 1.0 - g[None, :])
        return (np.broadcast_to(t[:, None, :], (m, p, len(g))),
                np.broadcast_to(wg, (m, p, len(g))))
    t, w = composite01(n // 2 + 2, 2)
    return np.broadcast_to(t, (m, p, len(t))), np.broadcast_to(w, (m, p, len(t)))


def near_pairs(gx: np.ndarray, gy: np.ndarray, kc: KernelConstants, evaluate_remainder):
    """Element-pair integrals for close pairs.

    ``evaluate_remainder(r)`` returns radial values with the static singular
    parts removed (ignored for static kernels).
    """
    n = len(gx)
    D = np.zeros((n, 2, 2, 2, 2), dtype=complex)
    N = np.zeros((n, 2, 2, 2, 2), dtype=complex)
    if n == 0:
        return D, N
    kind, sv, tv = _classify(gx, gy)
    for k in (0, 1, 2):
        idx = np.nonzero(kind == k)[0]
        if len(idx) == 0:
            continue
        step = 4000
        for start in range(0, len(idx), step):
            sel = idx[start:start + step]
            Dk, Nk = _near_group(gx[sel], gy[sel], k, sv[sel], tv[sel], kc, evaluate_remainder)
            D[sel] = Dk
            N[sel] = Nk
    return D, N


def _near_group(gx, gy, kind, sv, tv, kc, evaluate_remainder):
    hx, hy = gx[:, _H], gy[:, _H]
    up, wp = _outer_rule(kind, sv)
    xp = gx[:, None, _P0] + (up * hx[:, None])[..., None] * gx[:, None, _E]
    logm, srr, zr = _segment_moments(xp, gy)
    Na = np.stack([1.0 - up, up], axis=-1) * (wp * hx[:, None])[..., None]   # (n, p, a)
    log_ab = np.einsum("npa,npb->nab", Na, logm)
    srr_ab = np.einsum("npa,npbij->nabij", Na, srr)
    zr_ab = np.einsum("npa,npbi->nabi", Na, zr)
    nx = gx[:, _N]
    ny = gy[:, _N]
    tx = nx @ E_ROT.T
    ty = ny @ E_ROT.T
    dA = _shape_derivs(gx)
    dB = _shape_derivs(gy)
    eye = np.eye(2)
    mu = kc.mu
    nyz_ab = np.einsum("nabi,ni->nab", zr_ab, ny)
    nxz_ab = np.einsum("nabi,ni->nab", zr_ab, nx)
    log_a = log_ab.sum(2)
    srr_a = srr_ab.sum(2)
    # D: d12 singular = (1/2pi) (n_y.z)/r^2 I ; d3 singular = (1/2pi) log r E - 2 mu G_s E^T
    D = (nyz_ab / TWO_PI)[..., None, None] * eye
    d3_a = ((log_a / TWO_PI)[..., None, None] * E_ROT
            - 2.0 * ((kc.log_coeff_g * log_a)[..., None, None] * E_ROT.T
                     + kc.rr_coeff_g * srr_a @ E_ROT.T))
    D = D + d3_a[:, :, None] * dB[:, None, :, None, None]
    # N: n1 singular, n2 singular, n3 singular, n4 singular
    outer_nn = nx[:, :, None] * ny[:, None, :] + tx[:, :, None] * ty[:, None, :]
    N = (-kc.rho_omega2 / TWO_PI) * log_ab[..., None, None] * outer_nn[:, None, None]
    log_1 = log_ab.sum((1, 2))
    srr_1 = srr_ab.sum((1, 2))
    n2 = kc.k1_coeff * (log_1[:, None, None] * eye - srr_1)
    N = N + n2[:, None, None] * (dA[:, :, None] * dB[:, None, :])[..., None, None]
    n3_a = (-2.0 * mu / TWO_PI) * nxz_ab.sum(2)[..., None, None] * E_ROT
    N = N + n3_a[:, :, None] * dB[:, None, :, None, None]
    n4_b = (-2.0 * mu / TWO_PI) * nyz_ab.sum(1)[..., None, None] * E_ROT
    N = N + n4_b[:, None, :] * dA[:, :, None, None, None]
    if not kc.static:
        Dr, Nr = _near_remainder(gx, gy, kind, up, wp, tv, kc, evaluate_remainder)
        D = D + Dr
        N = N + Nr
    return D, N


def _near_remainder(gx, gy, kind, up, wp, tv, kc, evaluate_remainder):
    hx, hy = gx[:, _H], gy[:, _H]
    tq, wq = _inner_rule(kind, up, tv)
    xs = gx[:, None, _P0] + (up * hx[:, None])[..., None] * gx[:, None, _E]
    ys = gy[:, None, None, _P0] + (tq * hy[:, None, None])[..., None] * gy[:, None, None, _E]
    z = xs[:, :, None, :] - ys
    r = np.hypot(z[..., 0], z[..., 1])
    rv = evaluate_remainder(r)
    it = galerkin_integrands(kc, z, gx[:, None, None, _N], gy[:, None, None, _N], rv=rv)
    Na = np.stack([1.0 - up, up], axis=-1) * (wp * hx[:, None])[..., None]        # (n,p,a)
    Nb = np.stack([1.0 - tq, tq], axis=-1) * (wq * hy[:, None, None])[..., None]  # (n,p,q,b)
    wa = (wp * hx[:, None])
    wb = wq * hy[:, None, None]
    dA = _shape_derivs(gx)
    dB = _shape_derivs(gy)
    ab = lambda m: np.einsum("npa,npqb,npqij->nabij", Na, Nb, m, optimize=True)
    a_only = lambda m: np.einsum("npa,npq,npqij->naij", Na, wb, m, optimize=True)
    b_only = lambda m: np.einsum("np,npqb,npqij->nbij", wa, Nb, m, optimize=True)
    full = lambda m: np.einsum("np,npq,npqij->nij", wa, wb, m, optimize=True)
    D = ab(it.d12) + a_only(it.d3)[:, :, None] * dB[:, None, :, None, None]
    N = (ab(it.n1)
         + full(it.n2)[:, None, None] * (dA[:, :, None] * dB[:, None, :])[..., None, None]
         + a_only(it.n3)[:, :, None] * dB[:, None, :, None, None]
         + b_only(it.n4)[:, None, :] * dA[:, :, None, None, None])
    return D, N
