"""Elastodynamic fundamental solution and the kernels of the boundary operators.

Notation used throughout the package (z = x - y, r = |z|, zhat = z / r):

* ``phi_k = (i/4) H0(k r)`` solves (Laplacian + k^2) phi = -delta.
* ``f = phi_T - phi_L`` and ``D = (1/r) d/dr``, so that
  ``grad grad f = Df I + r^2 D^2 f zhat zhat^T``.
* ``mu G = phi_T I + k_T^-2 grad grad f``.

The radial quantities are gathered in :class:`RadialValues`. ``g1`` and ``g2``
are ``Df / k_T^2`` and ``r^2 D^2 f / k_T^2``; they are kept separate from ``df``
because the elastostatic limit sends ``df`` to zero while ``g1``, ``g2`` stay
finite (they become the Kelvin terms).

Small arguments use power series in r^2 with log terms, which avoids the
cancellation between the two Hankel terms; larger arguments use
``scipy.special.hankel1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import hankel1

from .medium import ElasticMedium

EULER_GAMMA = 0.57721566490153286061
TWO_PI = 2.0 * math.pi
SERIES_SWITCH = 2.0      # series used when k_T r <= this value
SERIES_TERMS = 26
E_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


class SingularEvaluationError(ValueError):
    """Kernel requested at (numerically) coincident points."""


@dataclass(frozen=True)
class KernelConstants:
    """Material constants as seen by the kernels.

    ``static=True`` selects the Kelvin (zero-frequency) kernels.
    """

    mu: float
    kappa: float
    k_L: float
    k_T: float
    rho_omega2: float
    static: bool = False

    @classmethod
    def from_medium(cls, medium: ElasticMedium, static: bool = False) -> "KernelConstants":
        return cls(mu=medium.mu, kappa=medium.kappa, k_L=medium.k_L, k_T=medium.k_T,
                   rho_omega2=0.0 if static else medium.rho * medium.omega ** 2,
                   static=static)

    @property
    def log_coeff_g(self) -> float:
        """Coefficient of log r I in mu G."""
        return -(1.0 + self.kappa) / (4.0 * math.pi)

    @property
    def rr_coeff_g(self) -> float:
        """Coefficient of zhat zhat^T in the singular part of mu G."""
        return (1.0 - self.kappa) / (4.0 * math.pi)

    @property
    def k1_coeff(self) -> float:
        """K1 ~ k1_coeff (log r I - zhat zhat^T) as r -> 0."""
        return self.mu * (1.0 - self.kappa) / math.pi


class RadialValues(NamedTuple):
    phi_T: np.ndarray
    phi_L: np.ndarray
    dphi_T: np.ndarray   # d phi_T / dr
    dphi_L: np.ndarray
    df: np.ndarray       # D f
    g1: np.ndarray       # D f / k_T^2
    g2: np.ndarray       # r^2 D^2 f / k_T^2


# ---------------------------------------------------------------------------
# series machinery: functions sum_m r^(2m) (a_m + b_m log r)
# ---------------------------------------------------------------------------

class _LogSeries:
    """Coefficients a_m, b_m of r^(2m) and r^(2m) log r, m = m0, m0+1, ..."""

    def __init__(self, m0: int, a: np.ndarray, b: np.ndarray):
        self.m0 = m0
        self.a = np.asarray(a, dtype=complex)
        self.b = np.asarray(b, dtype=complex)

    def radial_d(self) -> "_LogSeries":
        """Apply D = (1/r) d/dr."""
        m = np.arange(self.m0, self.m0 + len(self.a))
        return _LogSeries(self.m0 - 1, 2 * m * self.a + self.b, 2 * m * self.b)

    def drop_below(self, m_keep: int) -> "_LogSeries":
        """Zero the terms with power index m < m_keep."""
        a = self.a.copy()
        b = self.b.copy()
        for idx in range(len(a)):
            m = self.m0 + idx
            if m < m_keep:
                a[idx] = 0.0
                b[idx] = 0.0
        return _LogSeries(self.m0, a, b)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r2 = r * r
        logr = np.log(r)
        out = np.zeros(r.shape, dtype=complex)
        # positive powers by Horner, negative powers explicitly
        pos = [i for i in range(len(self.a)) if self.m0 + i >= 0]
        if pos:
            acc_a = np.zeros(r.shape, dtype=complex)
            acc_b = np.zeros(r.shape, dtype=complex)
            for i in reversed(pos):
                acc_a = acc_a * r2 + self.a[i]
                acc_b = acc_b * r2 + self.b[i]
            shift = self.m0 + pos[0]
            out += (acc_a + acc_b * logr) * r2 ** shift
        for i in range(len(self.a)):
            m = self.m0 + i
            if m < 0 and (self.a[i] != 0 or self.b[i] != 0):
                out += r2 ** m * (self.a[i] + self.b[i] * logr)
        return out


def _phi_series(k: float, terms: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(terms)
    fact = np.array([math.factorial(int(j)) for j in m], dtype=float)
    t = (-(k * k / 4.0)) ** m / fact ** 2
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, terms))])
    a = t * (0.25j - (math.log(k / 2.0) + EULER_GAMMA - harmonic) / TWO_PI)
    b = -t / TWO_PI
    return a.astype(complex), b.astype(complex)


def _difference_series(k_T: float, k_L: float, terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Series of f = phi_T - phi_L with the differences formed coefficientwise."""
    m = np.arange(terms)
    fact = np.array([math.factorial(int(j)) for j in m], dtype=float)
    sign = (-1.0) ** m
    qT, qL = k_T * k_T / 4.0, k_L * k_L / 4.0
    dt = sign * (qT ** m - qL ** m) / fact ** 2
    tT = sign * qT ** m / fact ** 2
    tL = sign * qL ** m / fact ** 2
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, terms))])
    a = (dt * (0.25j - (EULER_GAMMA - harmonic) / TWO_PI)
         - (tT * math.log(k_T / 2.0) - tL * math.log(k_L / 2.0)) / TWO_PI)
    a[0] = -math.log(k_T / k_L) / TWO_PI
    b = -dt / TWO_PI
    return a.astype(complex), b.astype(complex)


class _SeriesBundle:
    def __init__(self, k_T: float, k_L: float, terms: int = SERIES_TERMS):
        aT, bT = _phi_series(k_T, terms)
        aL, bL = _phi_series(k_L, terms)
        aF, bF = _difference_series(k_T, k_L, terms)
        self.phi_T = _LogSeries(0, aT, bT)
        self.phi_L = _LogSeries(0, aL, bL)
        self.dphi_T_over_r = self.phi_T.radial_d()
        self.dphi_L_over_r = self.phi_L.radial_d()
        f = _LogSeries(0, aF, bF)
        self.df = f.radial_d()
        self.d2f = self.df.radial_d()
        self.d3f = self.d2f.radial_d()
        # singular pieces: log r in phi, 1/r^2 in D phi, log r in Df, 1/r^2 in D^2 f
        self.phi_T_rem = _LogSeries(0, aT, np.concatenate([[0.0], bT[1:]]))
        self.phi_L_rem = _LogSeries(0, aL, np.concatenate([[0.0], bL[1:]]))
        self.dphi_T_rem = self.dphi_T_over_r.drop_below(0)
        self.dphi_L_rem = self.dphi_L_over_r.drop_below(0)
        b = self.df.b.copy()
        b[-self.df.m0] = 0.0
        self.df_rem = _LogSeries(self.df.m0, self.df.a, b)
        self.d2f_rem = self.d2f.drop_below(0)


_SERIES_CACHE: dict[tuple[float, float], _SeriesBundle] = {}


def _series(k_T: float, k_L: float) -> _SeriesBundle:
    key = (k_T, k_L)
    bundle = _SERIES_CACHE.get(key)
    if bundle is None:
        if len(_SERIES_CACHE) > 256:
            _SERIES_CACHE.clear()
        bundle = _SeriesBundle(k_T, k_L)
        _SERIES_CACHE[key] = bundle
    return bundle


# ---------------------------------------------------------------------------
# radial functions
# ---------------------------------------------------------------------------

def _check_r(r: np.ndarray, k: float) -> None:
    if r.size and np.min(r) * max(k, 1.0) < 1e-10:
        raise SingularEvaluationError("kernel evaluated at coincident points")


def radial_functions(r, kc: KernelConstants, remainder: bool = False) -> RadialValues:
    """Radial kernel functions at distances r.

    With ``remainder=True`` the static singular parts are removed:
    ``-log r / 2 pi`` from phi, ``-1 / (2 pi r)`` from phi', the log term of
    g1 and the constant limit of g2. ``df`` is always returned in full: it only
    enters through ``Df z``, which is bounded and integrated numerically.
    """
    r = np.asarray(r, dtype=float)
    if not remainder:
        _check_r(r, kc.k_T)
    elif r.size and np.min(r) <= 0.0:
        raise SingularEvaluationError("remainder evaluated at coincident points")
    if kc.static:
        zero = np.zeros(r.shape, dtype=complex)
        if remainder:
            return RadialValues(zero, zero, zero, zero, zero, zero, zero)
        logr = np.log(r)
        phi = (-logr / TWO_PI).astype(complex)
        dphi = (-1.0 / (TWO_PI * r)).astype(complex)
        c = (1.0 - kc.kappa) / (4.0 * math.pi)
        return RadialValues(phi, phi, dphi, dphi, zero,
                            (c * logr).astype(complex),
                            np.full(r.shape, c, dtype=complex))
    k_T, k_L = kc.k_T, kc.k_L
    out = [np.empty(r.shape, dtype=complex) for _ in range(6)]
    g1_part = out[4] if not remainder else np.empty(r.shape, dtype=complex)
    small = k_T * r <= SERIES_SWITCH
    if np.any(small):
        rs = r[small]
        s = _series(k_T, k_L)
        if remainder:
            vals = (s.phi_T_rem(rs), s.phi_L_rem(rs), rs * s.dphi_T_rem(rs),
                    rs * s.dphi_L_rem(rs), s.df(rs), rs * rs * s.d2f_rem(rs),
                    s.df_rem(rs))
        else:
            vals = (s.phi_T(rs), s.phi_L(rs), rs * s.dphi_T_over_r(rs),
                    rs * s.dphi_L_over_r(rs), s.df(rs), rs * rs * s.d2f(rs))
        for o, v in zip(out, vals):
            o[small] = v
        if remainder:
            g1_part[small] = vals[6]
    large = ~small
    if np.any(large):
        rl = r[large]
        xT, xL = k_T * rl, k_L * rl
        h0T, h1T = hankel1(0, xT), hankel1(1, xT)
        h0L, h1L = hankel1(0, xL), hankel1(1, xL)
        h2T = 2.0 / xT * h1T - h0T
        h2L = 2.0 / xL * h1L - h0L
        phi_T = 0.25j * h0T
        phi_L = 0.25j * h0L
        dphi_T = -0.25j * k_T * h1T
        dphi_L = -0.25j * k_L * h1L
        df = (dphi_T - dphi_L) / rl
        d2f = 0.25j * (k_T ** 2 * h2T - k_L ** 2 * h2L)
        if remainder:
            beta2 = (k_T ** 2 - k_L ** 2) / (4.0 * math.pi)
            logr = np.log(rl)
            phi_T = phi_T + logr / TWO_PI
            phi_L = phi_L + logr / TWO_PI
            dphi_T = dphi_T + 1.0 / (TWO_PI * rl)
            dphi_L = dphi_L + 1.0 / (TWO_PI * rl)
            g1_part[large] = df - beta2 * logr
            d2f = d2f - beta2
        for o, v in zip(out, (phi_T, phi_L, dphi_T, dphi_L, df, d2f)):
            o[large] = v
    inv_kT2 = 1.0 / (k_T * k_T)
    return RadialValues(out[0], out[1], out[2], out[3], out[4],
                        g1_part * inv_kT2, out[5] * inv_kT2)


def third_radial_derivative(r, kc: KernelConstants) -> np.ndarray:
    """r^3 D^3 f / k_T^2 (finite static limit)."""
    r = np.asarray(r, dtype=float)
    _check_r(r, kc.k_T)
    if kc.static:
        return (-2.0 * (1.0 - kc.kappa) / (4.0 * math.pi) / r).astype(complex)
    k_T, k_L = kc.k_T, kc.k_L
    out = np.empty(r.shape, dtype=complex)
    small = k_T * r <= SERIES_SWITCH
    if np.any(small):
        rs = r[small]
        out[small] = rs ** 3 * _series(k_T, k_L).d3f(rs)
    large = ~small
    if np.any(large):
        rl = r[large]
        vals = []
        for k in (k_T, k_L):
            x = k * rl
            h0, h1 = hankel1(0, x), hankel1(1, x)
            h2 = 2.0 / x * h1 - h0
            h3 = 4.0 / x * h2 - h1
            vals.append(-(k ** 3) * h3)
        out[large] = 0.25j * (vals[0] - vals[1])
    return out / (k_T * k_T)


# ---------------------------------------------------------------------------
# pointwise kernels
# ---------------------------------------------------------------------------

def _geometry(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x - y
    r = np.hypot(z[..., 0], z[..., 1])
    return z, r


def fundamental(medium: ElasticMedium | KernelConstants, x, y) -> np.ndarray:
    """G(x - y) as complex (..., 2, 2)."""
    kc = _constants(medium)
    z, r = _geometry(x, y)
    rv = radial_functions(r, kc)
    zh = z / r[..., None]
    eye = np.eye(2)
    mg = ((rv.phi_T + rv.g1)[..., None, None] * eye
          + rv.g2[..., None, None] * zh[..., :, None] * zh[..., None, :])
    return mg / kc.mu


def _constants(medium) -> KernelConstants:
    if isinstance(medium, KernelConstants):
        return medium
    return KernelConstants.from_medium(medium)


def fundamental_gradient(medium, x, y) -> np.ndarray:
    """d G_ik / d z_q as (..., i, k, q), z = x - y."""
    kc = _constants(medium)
    z, r = _geometry(x, y)
    rv = radial_functions(r, kc)
    t3 = third_radial_derivative(r, kc)
    zh = z / r[..., None]
    eye = np.eye(2)
    rinv = 1.0 / r
    first = (rv.dphi_T[..., None, None, None] * eye[:, :, None] * zh[..., None, None, :])
    a = (rv.g2 * rinv)[..., None, None, None]
    sym = (zh[..., :, None, None] * eye[None, :, :]
           + zh[..., None, :, None] * eye[:, None, :]
           + zh[..., None, None, :] * eye[:, :, None])
    cube = zh[..., :, None, None] * zh[..., None, :, None] * zh[..., None, None, :]
    third = a * sym + t3[..., None, None, None] * cube
    return (first + third) / kc.mu


def double_layer_kernel(medium, x, y, ny) -> np.ndarray:
    """T^{n_y} applied to G(x - y): entry (i, j) maps density component j to field component i."""
    if isinstance(medium, KernelConstants):
        raise TypeError("double_layer_kernel needs the full ElasticMedium")
    grad = fundamental_gradient(medium, x, y)          # d/dz
    ny = np.asarray(ny, dtype=float)
    c = medium.elastic_tensor()                          # C_jpkq
    # d/dy_q G_ik(x - y) = -dG_ik/dz_q
    return -np.einsum("jpkq,...p,...ikq->...ij", c, np.broadcast_to(ny, grad.shape[:-3] + (2,)), grad)


def kelvin_double_layer(medium: ElasticMedium, x, y, ny) -> np.ndarray:
    """Elastostatic double-layer kernel written out in closed form."""
    z, r = _geometry(x, y)
    ny = np.broadcast_to(np.asarray(ny, dtype=float), z.shape)
    zh = z / r[..., None]
    nu = medium.lam / (2.0 * (medium.lam + medium.mu))
    dr_dn = -(zh * ny).sum(-1)                # d r / d n_y
    eye = np.eye(2)
    pre = -1.0 / (4.0 * math.pi * (1.0 - nu) * r)
    term1 = dr_dn[..., None, None] * ((1 - 2 * nu) * eye + 2 * zh[..., :, None] * zh[..., None, :])
    # d r / d y_i = -zhat_i
    term2 = (1 - 2 * nu) * (-zh[..., :, None] * ny[..., None, :] + ny[..., :, None] * zh[..., None, :])
    # entry (i, j): field i from density j; Kelvin traction kernel T_ji(y; x) style
    return (pre[..., None, None] * (term1 - term2)).astype(complex)


def static_part_fundamental(medium, x, y) -> np.ndarray:
    """Kelvin part of G used in the static/dynamic split."""
    kc = _constants(medium)
    z, r = _geometry(x, y)
    zh = z / r[..., None]
    logr = np.log(r)
    mg = (kc.log_coeff_g * logr)[..., None, None] * np.eye(2) + kc.rr_coeff_g * zh[..., :, None] * zh[..., None, :]
    return (mg / kc.mu).astype(complex)


# ---------------------------------------------------------------------------
# integrands of the regularized Galerkin forms
# ---------------------------------------------------------------------------

class GalerkinIntegrands(NamedTuple):
    """Pointwise matrices of the integration-by-parts forms.

    With test shape N_a(x), trial shape N_b(y) and tangential derivatives dN:

    D = int int N_a N_b d12 + N_a dN_b d3
    N = int int N_a N_b n1 + dN_a dN_b n2 + N_a dN_b n3 + dN_a N_b n4
    """

    d12: np.ndarray
    d3: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray
    n4: np.ndarray


def galerkin_integrands(kc: KernelConstants, z, nx, ny, remainder: bool = False,
                        rv: RadialValues | None = None) -> GalerkinIntegrands:
    """Integrands for z = x - y with element normals nx (test) and ny (trial).

    ``remainder=True`` returns the integrands with the static singular parts
    removed (used together with analytic singular integration).
    """
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    if rv is None:
        rv = radial_functions(r, kc, remainder=remainder)
    nx = np.broadcast_to(np.asarray(nx, dtype=float), z.shape)
    ny = np.broadcast_to(np.asarray(ny, dtype=float), z.shape)
    zh = z / r[..., None]
    tx = nx @ E_ROT.T
    ty = ny @ E_ROT.T
    ez = z @ E_ROT.T
    eye = np.eye(2)
    mu = kc.mu

    def outer(a, b):
        return a[..., :, None] * b[..., None, :]

    def sc(v):
        return v[..., None, None]

    zz = outer(zh, zh)
    ny_zh = (ny * zh).sum(-1)
    nx_zh = (nx * zh).sum(-1)
    mg = sc(rv.phi_T + rv.g1) * eye + sc(rv.g2) * zz
    d12 = -sc(rv.dphi_T * ny_zh) * eye + sc(rv.df) * outer(z, ny)
    d3 = -(sc(rv.phi_T) * E_ROT + 2.0 * mg @ E_ROT.T)
    n1 = kc.rho_omega2 * (sc(rv.phi_L) * outer(nx, ny) + sc(rv.phi_T) * outer(tx, ty))
    n2 = 4.0 * mu * (sc(kc.kappa * rv.phi_L - rv.phi_T - rv.g1) * eye - sc(rv.g2) * zz)
    n3 = 2.0 * mu * (sc(rv.dphi_T * nx_zh) * E_ROT + sc(rv.df) * outer(nx, ez))
    n4 = 2.0 * mu * (sc(rv.dphi_T * ny_zh) * E_ROT - sc(rv.df) * outer(ez, ny))
    return GalerkinIntegrands(d12, d3, n1, n2, n3, n4)
