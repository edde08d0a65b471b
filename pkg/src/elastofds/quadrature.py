"""Gauss-Legendre rules on [0, 1], plain and graded toward an endpoint."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def graded01(n: int, power: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] clustered at 0 through the substitution t = u^power."""
    u, w = gauss01(n)
    return u ** power, w * power * u ** (power - 1)


def composite01(n: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = gauss01(n)
    edges = np.linspace(0.0, 1.0, panels + 1)
    x = (edges[:-1, None] + np.outer(np.diff(edges), u)).ravel()
    wt = np.outer(np.diff(edges), w).ravel()
    return x, wt


def split_graded(point: np.ndarray, n: int, power: int) -> tuple[np.ndarray, np.ndarray]:
    """Rules on [0, 1] split at ``point`` (per row) and graded toward it.

    Returns nodes and weights of shape (len(point), 2n).
    """
    g, wg = graded01(n, power)
    point = np.asarray(point, dtype=float)[..., None]
    left = point - point * g
    right = point + (1.0 - point) * g
    nodes = np.concatenate([left, right], axis=-1)
    weights = np.concatenate([point * wg, (1.0 - point) * wg], axis=-1)
    return nodes, weights
