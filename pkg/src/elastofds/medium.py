"""Isotropic elastic medium, incident plane P-wave and Burton-Miller coupling.

Time dependence is exp(+i omega t) in the plane-wave sign convention; the
scattered field uses the first-kind Hankel kernel. All quantities are
dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


@dataclass(frozen=True)
class ElasticMedium:
    rho: float
    lam: float
    mu: float
    omega: float
    c_L: float = field(init=False)
    c_T: float = field(init=False)
    k_L: float = field(init=False)
    k_T: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.mu > 0 and self.lam + 2 * self.mu > 0 and self.rho > 0):
            raise ParameterError("need mu > 0, lambda + 2 mu > 0, rho > 0")
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        c_L = math.sqrt((self.lam + 2 * self.mu) / self.rho)
        c_T = math.sqrt(self.mu / self.rho)
        object.__setattr__(self, "c_L", c_L)
        object.__setattr__(self, "c_T", c_T)
        object.__setattr__(self, "k_L", self.omega / c_L)
        object.__setattr__(self, "k_T", self.omega / c_T)

    @property
    def kappa(self) -> float:
        """Squared wavenumber ratio k_L^2 / k_T^2 = mu / (lambda + 2 mu)."""
        return self.mu / (self.lam + 2 * self.mu)

    def with_omega(self, omega: float) -> "ElasticMedium":
        return ElasticMedium(self.rho, self.lam, self.mu, omega)

    def elastic_tensor(self) -> np.ndarray:
        """C_ipjq as a (2, 2, 2, 2) array."""
        d = np.eye(2)
        return (self.lam * np.einsum("ip,jq->ipjq", d, d)
                + self.mu * (np.einsum("ij,pq->ipjq", d, d)
                             + np.einsum("iq,pj->ipjq", d, d)))


def medium_from_speeds(c_L: float, c_T: float, rho: float, omega: float) -> ElasticMedium:
    if not (c_L > 0 and c_T > 0 and rho > 0 and omega > 0):
        raise ParameterError("speeds, density and frequency must be positive")
    if c_L <= c_T:
        raise ParameterError("longitudinal speed must exceed transverse speed")
    mu = rho * c_T ** 2
    lam = rho * (c_L ** 2 - 2 * c_T ** 2)
    return ElasticMedium(rho=rho, lam=lam, mu=mu, omega=omega)


def default_medium(omega: float) -> ElasticMedium:
    """c_L = sqrt(3), c_T = 1, rho = 1, hence lambda = mu = 1."""
    return medium_from_speeds(math.sqrt(3.0), 1.0, 1.0, omega)


@dataclass(frozen=True)
class IncidentWave:
    """Plane longitudinal wave amplitude * d * exp(-i k_L d.x)."""

    direction: tuple[float, float] = (1.0, 0.0)
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        d = np.asarray(self.direction, dtype=float)
        norm = float(np.hypot(d[0], d[1]))
        if abs(norm - 1.0) > 1e-12:
            raise ParameterError("incident direction must be a unit vector")

    @classmethod
    def from_angle(cls, angle_rad: float, amplitude: complex = 1.0) -> "IncidentWave":
        return cls((math.cos(angle_rad), math.sin(angle_rad)), amplitude)


def incident_displacement(wave: IncidentWave, medium: ElasticMedium, x) -> np.ndarray:
    """Displacement at points x (..., 2); returns complex (..., 2)."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(wave.direction, dtype=float)
    phase = np.exp(-1j * medium.k_L * (x @ d))
    return wave.amplitude * phase[..., None] * d


def incident_traction(wave: IncidentWave, medium: ElasticMedium, x, n) -> np.ndarray:
    """Traction C_ipjq n_p du_j/dx_q of the plane wave at x with normal n."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    d = np.asarray(wave.direction, dtype=float)
    u0 = wave.amplitude * np.exp(-1j * medium.k_L * (x @ d))
    nd = n @ d
    vec = medium.lam * n + 2 * medium.mu * nd[..., None] * d
    return (-1j * medium.k_L * u0)[..., None] * vec


@dataclass(frozen=True)
class BurtonMillerCoupling:
    alpha: complex

    def __post_init__(self) -> None:
        if complex(self.alpha).imag == 0:
            raise ParameterError("Burton-Miller coupling needs a nonzero imaginary part")

    @classmethod
    def default(cls, medium: ElasticMedium) -> "BurtonMillerCoupling":
        return cls(1j / medium.k_T)
