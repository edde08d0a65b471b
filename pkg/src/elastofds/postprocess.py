"""Fields off the boundary from the double-layer representation, null-field probes, intensity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import double_layer_kernel, fundamental
from .medium import ElasticMedium, IncidentWave, incident_displacement
from .quadrature import gauss01

FIELD_ORDER = 8
PROBE_RADIUS = 0.3
PROBE_COUNT = 16


class ProximityError(ValueError):
    """Evaluation point closer to the boundary than one element length."""


@dataclass(frozen=True)
class FieldSample:
    location: np.ndarray
    displacement: np.ndarray

    @property
    def intensity(self) -> float:
        return float(np.sum(np.abs(self.displacement) ** 2))


def distance_to_boundary(mesh, points) -> np.ndarray:
    """Distance from each point to the polygon."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    rel = p[:, None, :] - mesh.starts[None, :, :]
    s = np.clip(np.einsum("pec,ec->pe", rel, mesh.tangents), 0.0, mesh.lengths[None, :])
    foot = mesh.starts[None, :, :] + s[..., None] * mesh.tangents[None, :, :]
    return np.hypot(*(p[:, None, :] - foot).transpose(2, 0, 1)).min(axis=1)


def scattered_field(mesh, medium: ElasticMedium, nodal: np.ndarray, points,
                    order: int = FIELD_ORDER, chunk: int = 64) -> np.ndarray:
    """-int (T^{n_y} G)(x - y) u(y) ds(y) with P1 interpolation of ``nodal`` (N, 2)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    nodal = np.asarray(nodal, dtype=complex)
    if distance_to_boundary(mesh, points).min(initial=np.inf) <= mesh.lengths.max():
        raise ProximityError("evaluation point within one element length of the boundary; "
                             "move it further away")
    u, w = gauss01(order)
    y = mesh.starts[:, None, :] + u[None, :, None] * mesh.lengths[:, None, None] \
        * mesh.tangents[:, None, :]
    dens = (1.0 - u)[None, :, None] * nodal[:, None, :] \
        + u[None, :, None] * np.roll(nodal, -1, axis=0)[:, None, :]
    wt = mesh.lengths[:, None] * w[None, :]
    ny = np.broadcast_to(mesh.normals[:, None, :], y.shape)
    out = np.zeros((len(points), 2), dtype=complex)
    for a in range(0, len(points), chunk):
        x = points[a:a + chunk, None, None, :]
        K = double_layer_kernel(medium, x, y[None], ny[None])          # (p, e, q, 2, 2)
        out[a:a + chunk] = -np.einsum("peqij,eqj,eq->pi", K, dens, wt)
    return out


def evaluate_field(mesh, medium: ElasticMedium, wave: IncidentWave, nodal: np.ndarray,
                   points, order: int = FIELD_ORDER) -> list[FieldSample]:
    """Total displacement u^I + scattered at points away from the boundary."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    total = incident_displacement(wave, medium, points) + scattered_field(
        mesh, medium, nodal, points, order)
    return [FieldSample(p, d) for p, d in zip(points, total)]


def probe_points(radius: float = PROBE_RADIUS, count: int = PROBE_COUNT,
                 center=(0.0, 0.0)) -> np.ndarray:
    theta = 2 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center)


def null_field_residual(mesh, medium: ElasticMedium, wave: IncidentWave, nodal: np.ndarray,
                        points=None) -> float:
    """max |u(x)| over interior probes, relative to max |u^I| (= |amplitude|)."""
    points = probe_points() if points is None else np.asarray(points, dtype=float)
    samples = evaluate_field(mesh, medium, wave, nodal, points)
    peak = max(float(np.linalg.norm(s.displacement)) for s in samples)
    return peak / abs(wave.amplitude)


def nearest_node(mesh, point=(1.0, 0.0)) -> int:
    d = np.hypot(*(mesh.nodes - np.asarray(point, dtype=float)).T)
    return int(np.argmin(d))


def nodal_intensity(nodal: np.ndarray, node: int) -> float:
    """|u_1|^2 + |u_2|^2 at a boundary node."""
    return float(np.sum(np.abs(np.asarray(nodal)[node, :2]) ** 2))


def point_source_field(medium: ElasticMedium, source, force, x) -> np.ndarray:
    """Displacement G(x - source) force of a time-harmonic point force (test helper)."""
    G = fundamental(medium, np.asarray(x, dtype=float), np.asarray(source, dtype=float))
    return G @ np.asarray(force, dtype=complex)
