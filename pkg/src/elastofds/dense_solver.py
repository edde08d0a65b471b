"""Conventional dense solver: full Galerkin matrix and partial-pivoted LU."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

from .assembly import Assembler, CellLayout, default_alpha
from .geometry import BoundaryMesh, ClusterTree
from .medium import ElasticMedium, IncidentWave

COND_WARN_RCOND = 1e-6


class SolverError(RuntimeError):
    """The matrix is numerically singular."""


class ConditionWarning(RuntimeWarning):
    """The estimated reciprocal condition number is small."""


class DenseFactorization:
    """LU factors of a square matrix; solves reuse them for any number of right-hand sides."""

    def __init__(self, A: np.ndarray, overwrite: bool = False, estimate_condition: bool = False):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        anorm = float(np.abs(A).sum(axis=0).max()) if estimate_condition else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)     # reported below as SolverError
            self.lu, self.piv = lu_factor(A, overwrite_a=overwrite, check_finite=False)
        diag = np.abs(np.diag(self.lu))
        self.min_pivot = float(diag.min()) if diag.size else 0.0
        if diag.size and (not np.all(np.isfinite(diag)) or self.min_pivot == 0.0):
            raise SolverError(f"singular matrix (smallest pivot {self.min_pivot:.3e})")
        self.rcond = None
        if estimate_condition:
            rcond, info = zgecon(self.lu, anorm, norm="1")
            self.rcond = float(rcond) if info == 0 else 0.0

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        if rhs.shape[0] != self.n:
            raise ValueError("right-hand side has the wrong length")
        return lu_solve((self.lu, self.piv), rhs, check_finite=False)


def conv_solve(A: np.ndarray, rhs: np.ndarray, overwrite: bool = False) -> np.ndarray:
    """Solve A x = rhs for one vector or a column stack, factoring once."""
    return DenseFactorization(A, overwrite=overwrite).solve(rhs)


@dataclass
class ConvResult:
    """Nodal solutions (N, 2, m) plus phase timings in seconds."""

    solution: np.ndarray
    times: dict = field(default_factory=dict)
    rcond: float | None = None

    @property
    def total_time(self) -> float:
        return float(sum(self.times.values()))


def solve_conv(mesh: BoundaryMesh, medium: ElasticMedium, waves, tree: ClusterTree,
               alpha: complex | None = None, burton_miller: bool = True,
               backend: str | None = None, threads: int = 1, budget: float | None = None,
               estimate_condition: bool = False) -> ConvResult:
    """Dense Galerkin solve for one or more incident waves.

    With ``burton_miller=False`` the operator is D + I/2 and the right-hand
    side is the projection of u^I alone.
    """
    waves = [waves] if isinstance(waves, IncidentWave) else list(waves)
    if burton_miller:
        alpha = default_alpha(medium) if alpha is None else complex(alpha)
    else:
        alpha = 0.0
    times = {}
    t0 = time.perf_counter()
    asm = Assembler(mesh, medium, alpha, backend=backend, threads=threads)
    A = asm.dense(tree, budget=budget)
    layout = CellLayout(tree)
    F = layout.pack(asm.rhs_nodal_many(waves))
    t1 = time.perf_counter()
    times["assembly"] = t1 - t0
    fac = DenseFactorization(A, overwrite=True, estimate_condition=estimate_condition)
    del A
    t2 = time.perf_counter()
    times["factorization"] = t2 - t1
    X = fac.solve(F)
    times["solve"] = time.perf_counter() - t2
    if fac.rcond is not None and fac.rcond < COND_WARN_RCOND:
        warnings.warn(f"ill-conditioned system (rcond estimate {fac.rcond:.2e})",
                      ConditionWarning, stacklevel=2)
    return ConvResult(layout.unpack(X), times, fac.rcond)


def conv_solve_non_bm(mesh: BoundaryMesh, medium: ElasticMedium, wave: IncidentWave,
                      tree: ClusterTree | None = None, **kwargs) -> ConvResult:
    """Solve (D + I/2) u = u^I; warns when the condition estimate is poor."""
    tree = tree if tree is not None else ClusterTree(mesh.N, 0)
    return solve_conv(mesh, medium, wave, tree, burton_miller=False, estimate_condition=True,
                      **kwargs)
