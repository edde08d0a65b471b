"""Piecewise Chebyshev tables of the radial kernel functions.

Far-field quadrature evaluates the seven complex radial functions of
:mod:`elastofds.kernels` millions of times; the table replaces Hankel
evaluations by a short Clenshaw recurrence. The abscissa is warped so that
intervals are uniform in log r below r_c = 1 / k_T and uniform in k_T r
above it, which keeps both the log singularity and the oscillation resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import KernelConstants, RadialValues, radial_functions

N_FUNCS = 14          # seven complex functions, split into real/imaginary parts
DEGREE = 16
WIDTH = 0.5


class TableRangeError(ValueError):
    """Distance outside the tabulated range."""


@dataclass(frozen=True)
class RadialTable:
    coeffs: np.ndarray       # (n_intervals, DEGREE, N_FUNCS)
    w_min: float
    width: float
    r_c: float
    r_lo: float
    r_hi: float

    @property
    def log_rc(self) -> float:
        return math.log(self.r_c)

    def warp(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r_c, np.log(np.minimum(r, self.r_c)),
                        self.log_rc + (r - self.r_c) / self.r_c)

    def unwarp(self, w: np.ndarray) -> np.ndarray:
        return np.where(w < self.log_rc, np.exp(np.minimum(w, self.log_rc)),
                        self.r_c * (1.0 + w - self.log_rc))

    def evaluate(self, r) -> RadialValues:
        r = np.asarray(r, dtype=float)
        if r.size and (r.min() < self.r_lo or r.max() > self.r_hi):
            raise TableRangeError("distance outside radial table range")
        w = self.warp(r)
        pos = (w - self.w_min) / self.width
        idx = np.clip(pos.astype(np.int64), 0, len(self.coeffs) - 1)
        t = 2.0 * (pos - idx) - 1.0
        c = self.coeffs[idx]                     # (..., DEGREE, N_FUNCS)
        b1 = np.zeros(r.shape + (N_FUNCS,))
        b2 = np.zeros_like(b1)
        t2 = (2.0 * t)[..., None]
        for j in range(DEGREE - 1, 0, -1):
            b1, b2 = c[..., j, :] + t2 * b1 - b2, b1
        vals = c[..., 0, :] + t[..., None] * b1 - b2
        comp = vals[..., 0::2] + 1j * vals[..., 1::2]
        return RadialValues(*(comp[..., i] for i in range(7)))


def build_table(kc: KernelConstants, r_lo: float, r_hi: float,
                degree: int = DEGREE, width: float = WIDTH,
                remainder: bool = False) -> RadialTable:
    """Table on [r_lo, r_hi]; ``remainder`` tabulates the functions with the
    static singular parts removed."""
    if degree != DEGREE:
        raise ValueError("table degree is fixed at build time")
    r_c = 1.0 / kc.k_T if not kc.static else max(r_hi, 1.0) * 2.0
    log_rc = math.log(r_c)
    warp = lambda r: math.log(r) if r < r_c else log_rc + (r - r_c) / r_c
    # put a breakpoint at the warp switch so no interval straddles it
    w_min = log_rc - width * math.ceil((log_rc - warp(r_lo)) / width + 1e-9)
    w_max = warp(r_hi)
    n_int = max(1, int(math.ceil((w_max - w_min) / width)))
    j = np.arange(degree)
    t = np.cos(np.pi * (j + 0.5) / degree)            # Chebyshev points
    w = w_min + (np.arange(n_int)[:, None] + 0.5 * (t[None, :] + 1.0)) * width
    r = np.where(w < log_rc, np.exp(np.minimum(w, log_rc)), r_c * (1.0 + w - log_rc))
    rv = radial_functions(r, kc, remainder=remainder)
    vals = np.empty(r.shape + (N_FUNCS,))
    for i, v in enumerate(rv):
        vals[..., 2 * i] = v.real
        vals[..., 2 * i + 1] = v.imag
    # discrete cosine transform to Chebyshev coefficients
    cos_mat = np.cos(np.pi * np.outer(j, j + 0.5) / degree)       # (k, node)
    coeffs = (2.0 / degree) * np.einsum("kn,inf->ikf", cos_mat, vals)
    coeffs[:, 0, :] *= 0.5
    return RadialTable(np.ascontiguousarray(coeffs), w_min, width, r_c, r_lo, r_hi)
