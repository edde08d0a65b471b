"""Boundary curve, polygonal meshes, cluster tree and mesh text I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .medium import ParameterError

E_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class BoundaryCurve:
    """Star curve ((r + a cos b theta) (cos theta, sin theta)) / (1 + a)."""

    r: float = 1.0
    a: float = 0.3
    b: float = 3.0

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        rad = (self.r + self.a * np.cos(self.b * theta)) / (1.0 + self.a)
        return np.stack([rad * np.cos(theta), rad * np.sin(theta)], axis=-1)

    def perimeter(self, samples: int = 200_000) -> float:
        """Arc length by the periodic trapezoidal rule on the exact speed."""
        theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        rad = (self.r + self.a * np.cos(self.b * theta))
        drad = -self.a * self.b * np.sin(self.b * theta)
        speed = np.hypot(rad, drad) / (1.0 + self.a)
        return float(speed.mean() * 2 * np.pi)


def curve_point(curve: BoundaryCurve, theta: float) -> np.ndarray:
    return curve.point(theta)


class Polygon:
    """Closed polygon with P1 hat functions on its nodes.

    Element s joins node s to node s+1 (mod N). ``normals`` are unit element
    normals; ``tau_sign`` is tau.e with tau = E n, which fixes the sign of the
    tangential derivative of the hats along the element.
    """

    def __init__(self, nodes: np.ndarray, normals: np.ndarray | None = None):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or len(nodes) < 3:
            raise ParameterError("a polygon needs at least three 2D nodes")
        self.nodes = nodes
        self.starts = nodes
        self.ends = np.roll(nodes, -1, axis=0)
        edge = self.ends - self.starts
        self.lengths = np.hypot(edge[:, 0], edge[:, 1])
        if np.any(self.lengths <= 0):
            raise ParameterError("zero-length element")
        self.tangents = edge / self.lengths[:, None]
        if normals is None:
            normals = self.tangents @ E_ROT.T
        self.normals = np.ascontiguousarray(normals, dtype=float)
        tau = self.normals @ E_ROT.T
        self.tau_sign = np.einsum("ij,ij->i", tau, self.tangents)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    def node_elements(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Elements on which the hat of each node lives: (previous, next)."""
        nodes = np.asarray(nodes)
        return (nodes - 1) % self.n_elements, nodes

    def element_geometry(self, elements=None) -> np.ndarray:
        """Packed (n, 8) array: start(2), tangent(2), normal(2), length, tau_sign."""
        if elements is None:
            elements = np.arange(self.n_elements)
        return np.ascontiguousarray(np.column_stack([
            self.starts[elements], self.tangents[elements], self.normals[elements],
            self.lengths[elements], self.tau_sign[elements]]))


class BoundaryMesh(Polygon):
    """N-polygon approximating the cavity boundary; normals point into the cavity."""

    def __init__(self, nodes: np.ndarray, curve: BoundaryCurve | None = None):
        nodes = np.asarray(nodes, dtype=float)
        if len(nodes) < 8:
            raise ParameterError("mesh needs at least 8 elements")
        super().__init__(nodes)
        self.curve = curve
        # orient normals toward the cavity (signed area test)
        area = 0.5 * np.sum(self.starts[:, 0] * self.ends[:, 1] - self.ends[:, 0] * self.starts[:, 1])
        if area < 0:
            self.normals = -self.normals
            self.tau_sign = -self.tau_sign

    @property
    def N(self) -> int:
        return self.n_nodes

    @cached_property
    def h_max(self) -> float:
        return float(self.lengths.max())

    def write(self, path: str | Path) -> None:
        write_mesh(self, path)


def build_mesh(curve: BoundaryCurve, N: int) -> BoundaryMesh:
    if N < 8:
        raise ParameterError("N must be at least 8")
    theta = 2 * np.pi * np.arange(N) / N
    nodes = curve.point(theta)
    nodes[0] = curve.point(0.0)
    return BoundaryMesh(nodes, curve)


def circle_mesh(N: int, radius: float = 1.0, center=(0.0, 0.0)) -> BoundaryMesh:
    theta = 2 * np.pi * np.arange(N) / N
    nodes = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center)
    return BoundaryMesh(nodes)


def write_mesh(mesh: Polygon, path: str | Path) -> None:
    lines = [str(mesh.n_nodes)]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path: str | Path) -> BoundaryMesh:
    rows = [r.split() for r in Path(path).read_text(encoding="utf-8").splitlines() if r.strip()]
    try:
        n = int(rows[0][0])
        nodes = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"malformed mesh file: {exc}") from exc
    if nodes.shape != (n, 2):
        raise ParameterError("mesh file node count does not match header")
    return BoundaryMesh(nodes)


@dataclass(frozen=True)
class ClusterTree:
    """Uniform binary tree over N nodes; cell p at level l covers a contiguous range.

    Cells are numbered 0 .. 2^(L+1) - 2, children of i are 2i+1 and 2i+2, leaves
    are 2^L - 1 .. 2^(L+1) - 2. Node indices are 0-based here.
    """

    N: int
    L: int

    def __post_init__(self) -> None:
        if self.L < 0:
            raise ParameterError("tree depth must be nonnegative")
        if self.N % (1 << self.L) != 0:
            raise ParameterError("N must be divisible by 2^L")

    @property
    def leaf_size(self) -> int:
        return self.N >> self.L

    @property
    def n_cells(self) -> int:
        return (1 << (self.L + 1)) - 1

    @staticmethod
    def level_of(p: int) -> int:
        return int(math.floor(math.log2(p + 1)))

    @staticmethod
    def children(p: int) -> tuple[int, int]:
        return 2 * p + 1, 2 * p + 2

    @staticmethod
    def parent(p: int) -> int:
        if p == 0:
            raise ParameterError("root has no parent")
        return (p - 1) // 2

    @staticmethod
    def level_cells(level: int) -> range:
        return range((1 << level) - 1, (1 << (level + 1)) - 1)

    def leaves(self) -> range:
        return self.level_cells(self.L)

    def node_range(self, p: int) -> range:
        level = self.level_of(p)
        size = self.N >> level
        start = (p - ((1 << level) - 1)) * size
        return range(start, start + size)

    def indices(self, p: int) -> np.ndarray:
        """J_p as 0-based node indices."""
        return np.arange(self.node_range(p).start, self.node_range(p).stop)


def build_tree(N: int, L: int) -> ClusterTree:
    return ClusterTree(N, L)
