"""Desk-scale experiment drivers returning CSV-ready rows.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` (rows plus a summary dict). Timing uses the
monotonic clock; for N <= 1600 a warm-up run is discarded and the median of
three runs is kept.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .assembly import default_alpha
from .dense_solver import ConditionWarning, solve_conv
from .fds import FastDirectSolver
from .geometry import BoundaryCurve, BoundaryMesh, ClusterTree, build_mesh, read_mesh
from .medium import IncidentWave, ParameterError, default_medium
from .postprocess import nearest_node, nodal_intensity, null_field_residual, probe_points

EXPERIMENTS = ("error_table", "single_level_error", "scaling", "multi_rhs", "omega_time",
               "omega_error", "intensity_sweep", "null_field")
SOLVERS = ("fds", "conv", "conv-non-bm")
LEAF_SIZE = 100


@dataclass
class ExperimentConfig:
    experiment: str
    n_elements: int | None = None
    leaf_size: int = LEAF_SIZE
    levels: int | None = None
    ell0: int = 1
    epsilon: float | None = None
    omega: float | None = None
    omega_max: float | None = None
    omega_step: float | None = None
    alpha_re: float | None = None
    alpha_im: float | None = None
    incident_angle_deg: float = 0.0
    rhs_count: int | None = None
    threads: int = 1
    proxy_radius_factor: float = 1.5
    proxy_m: int = 64
    solver: str = "fds"
    out: str | None = None
    seed: int | None = None
    mesh_file: str | None = None
    backend: str | None = None

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if self.solver not in SOLVERS:
            raise ParameterError(f"unknown solver {self.solver!r}")
        if self.leaf_size < 1 or self.threads < 1:
            raise ParameterError("leaf size and thread count must be positive")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if self.n_elements is not None and self.levels is not None \
                and self.n_elements % (1 << self.levels):
            raise ParameterError("N must be divisible by 2^L")

    def alpha(self, omega: float) -> complex:
        if self.alpha_re is None and self.alpha_im is None:
            return default_alpha(default_medium(omega))
        return complex(self.alpha_re or 0.0, self.alpha_im or 0.0)

    def wave(self) -> IncidentWave:
        return IncidentWave.from_angle(math.radians(self.incident_angle_deg))

    def levels_for(self, N: int) -> int:
        if self.levels is not None and (self.n_elements is None or self.n_elements == N):
            return self.levels
        L = max(0, round(math.log2(N / self.leaf_size)))
        if N % (1 << L):
            raise ParameterError(f"N={N} is not divisible into 2^{L} leaves")
        return L

    def mesh(self, N: int) -> BoundaryMesh:
        if self.mesh_file:
            mesh = read_mesh(self.mesh_file)
            if mesh.N != N:
                raise ParameterError("mesh file does not match the requested N")
            return mesh
        return build_mesh(BoundaryCurve(), N)

    def fds(self, N: int, omega: float, epsilon: float, levels: int | None = None,
            ell0: int | None = None, threads: int | None = None) -> FastDirectSolver:
        medium = default_medium(omega)
        return FastDirectSolver(self.mesh(N), medium, self.levels_for(N) if levels is None
                                else levels, self.ell0 if ell0 is None else ell0, epsilon,
                                self.alpha(omega), self.proxy_radius_factor, self.proxy_m,
                                threads=threads or self.threads, backend=self.backend)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    return str(v)


def write_result(result: ExperimentResult, config: ExperimentConfig, path: str | Path) -> Path:
    """CSV at ``path`` and the JSON config echo (with the summary) next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([format_value(row[c]) for c in result.columns])
    echo = {"config": config.to_dict(), "summary": _jsonable(result.summary)}
    path.with_suffix(".json").write_text(json.dumps(echo, indent=2) + "\n", encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def relative_error(x: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(x - ref) / np.linalg.norm(ref))


def fitted_exponent(Ns, times) -> float:
    """Least-squares slope of log t against log N."""
    return float(np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(times, float)), 1)[0])


def max_adjacent_jump(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(np.diff(v)) / np.maximum(np.abs(v[:-1]), 1e-300)))


# ---------------------------------------------------------------------------
# timed runs
# ---------------------------------------------------------------------------

def fds_run(cfg: ExperimentConfig, N: int, omega: float, epsilon: float, levels=None,
            ell0=None, threads=None):
    """Build + solve for the configured wave; returns (solution, seconds, solver)."""
    t0 = time.perf_counter()
    S = cfg.fds(N, omega, epsilon, levels, ell0, threads)
    S.factor()
    x = S.solve(S.rhs(cfg.wave()))
    return x[..., 0], time.perf_counter() - t0, S


def conv_run(cfg: ExperimentConfig, N: int, omega: float, burton_miller: bool = True,
             levels=None, threads=None):
    t0 = time.perf_counter()
    tree = ClusterTree(N, cfg.levels_for(N) if levels is None else levels)
    medium = default_medium(omega)
    with threadpool_limits(limits=threads or cfg.threads):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionWarning)
            res = solve_conv(cfg.mesh(N), medium, cfg.wave(), tree,
                             alpha=cfg.alpha(omega) if burton_miller else None,
                             burton_miller=burton_miller, backend=cfg.backend,
                             threads=threads or cfg.threads,
                             estimate_condition=not burton_miller)
    return res.solution[..., 0], time.perf_counter() - t0, res


def timed(fn, N: int, repeat_below: int = 1600):
    """Median wall time of ``fn`` (warm-up discarded, three repeats) for N <= repeat_below."""
    if N <= repeat_below:
        fn()
        runs = [fn() for _ in range(3)]
        out = runs[len(runs) // 2]
        return out[0], statistics.median(r[1] for r in runs), out[2]
    return fn()


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

ERROR_TABLE_CASES = ((400, 2), (1600, 4), (6400, 6))
ERROR_TABLE_EPS = (1e-8, 1e-10)


def _cases(cfg: ExperimentConfig, default):
    if cfg.n_elements is not None:
        return ((cfg.n_elements, cfg.levels_for(cfg.n_elements)),)
    return default


def run_error_table(cfg: ExperimentConfig) -> ExperimentResult:
    omega = cfg.omega or 2.0
    eps_list = (cfg.epsilon,) if cfg.epsilon else ERROR_TABLE_EPS
    rows = []
    for N, L in _cases(cfg, ERROR_TABLE_CASES):
        xc, tc, _ = conv_run(cfg, N, omega, levels=L)
        for eps in eps_list:
            x, tf, S = fds_run(cfg, N, omega, eps, levels=L)
            rows.append(dict(N=N, L=L, ell0=cfg.ell0, epsilon=eps,
                             relative_error=relative_error(x, xc), fds_time=tf, conv_time=tc,
                             top_dimension=S.factorization.top_dimension))
    return ExperimentResult(["N", "L", "ell0", "epsilon", "relative_error", "fds_time",
                             "conv_time", "top_dimension"], rows)


def run_single_level_error(cfg: ExperimentConfig) -> ExperimentResult:
    omega = cfg.omega or 2.0
    eps = cfg.epsilon or 1e-8
    rows = []
    for N, L in _cases(cfg, ((3200, 5),)):
        xc, _, _ = conv_run(cfg, N, omega, levels=L)
        for mode, ell0 in (("single", L - 1), ("multi", cfg.ell0)):
            x, tf, _ = fds_run(cfg, N, omega, eps, levels=L, ell0=ell0)
            rows.append(dict(N=N, L=L, ell0=ell0, mode=mode, epsilon=eps,
                             relative_error=relative_error(x, xc), fds_time=tf))
    return ExperimentResult(["N", "L", "ell0", "mode", "epsilon", "relative_error", "fds_time"],
                            rows)


FDS_LADDER = (800, 1600, 3200, 6400, 12800, 25600)
CONV_LADDER = (400, 800, 1600, 3200)


def run_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    """Wall time of a full build + solve over an N ladder; exponent in the summary."""
    omega = cfg.omega or 2.0
    eps = cfg.epsilon or 1e-8
    if cfg.n_elements is not None:
        ladder = (cfg.n_elements,)
    else:
        ladder = FDS_LADDER if cfg.solver == "fds" else CONV_LADDER
    rows = []
    for N in ladder:
        if cfg.solver == "fds":
            x, t, S = timed(lambda: fds_run(cfg, N, omega, eps), N)
            phases = S.factorization.times
            rows.append(dict(solver="fds", N=N, threads=cfg.threads, time=t,
                             assembly=phases["setup"] + phases["leaf_blocks"],
                             factorization=phases["factor_total"] - phases["leaf_blocks"],
                             solve=sum(S.last_solve_times.values())))
        else:
            bm = cfg.solver == "conv"
            x, t, res = timed(lambda: conv_run(cfg, N, omega, burton_miller=bm), N)
            rows.append(dict(solver=cfg.solver, N=N, threads=cfg.threads, time=t,
                             assembly=res.times["assembly"],
                             factorization=res.times["factorization"],
                             solve=res.times["solve"]))
    summary = {}
    if len(rows) > 1:
        summary["fitted_exponent"] = fitted_exponent([r["N"] for r in rows],
                                                     [r["time"] for r in rows])
    return ExperimentResult(["solver", "N", "threads", "time", "assembly", "factorization",
                             "solve"], rows, summary)


def run_parallel_check(cfg: ExperimentConfig, N: int = 12800, threads: int = 4) -> dict:
    """FDS on one worker and on ``threads`` workers: speedup and bitwise agreement."""
    omega = cfg.omega or 2.0
    eps = cfg.epsilon or 1e-8
    x1, t1, _ = fds_run(cfg, N, omega, eps, threads=1)
    xt, tt, _ = fds_run(cfg, N, omega, eps, threads=threads)
    return dict(N=N, threads=threads, time_1=t1, time_n=tt, speedup=t1 / tt,
                bitwise_identical=bool(np.array_equal(x1.view(np.float64), xt.view(np.float64))))


def run_multi_rhs(cfg: ExperimentConfig, fresh: str = "all") -> ExperimentResult:
    """First build + solve, then further incident angles against the same factorization.

    ``fresh`` chooses which right-hand sides are re-solved end to end for the
    consistency check: ``all``, ``sample`` (first, 37th and last) or ``none``.
    """
    N = cfg.n_elements or 1600
    omega = cfg.omega or 2.0
    eps = cfg.epsilon or 1e-8
    count = cfg.rhs_count or 180
    angles = cfg.incident_angle_deg + 360.0 * np.arange(count) / count
    waves = [IncidentWave.from_angle(math.radians(a)) for a in angles]
    t0 = time.perf_counter()
    S = cfg.fds(N, omega, eps)
    S.factor()
    sols = [S.solve(S.rhs(waves[0]))[..., 0]]
    times = [time.perf_counter() - t0]
    for w in waves[1:]:
        t = time.perf_counter()
        sols.append(S.solve(S.rhs(w))[..., 0])
        times.append(time.perf_counter() - t)
    if fresh == "all":
        check = range(count)
    elif fresh == "sample":
        check = sorted({0, min(36, count - 1), count - 1})
    else:
        check = ()
    diffs = {}
    for i in check:
        F = cfg.fds(N, omega, eps)
        F.factor()
        diffs[i] = relative_error(sols[i], F.solve(F.rhs(waves[i]))[..., 0])
    rows = [dict(rhs_index=i + 1, angle_deg=float(angles[i]), time=times[i],
                 fresh_difference=diffs.get(i, float("nan"))) for i in range(count)]
    per_rhs = float(np.mean(times[1:])) if count > 1 else float("nan")
    summary = dict(first_time=times[0], mean_additional_time=per_rhs,
                   ratio=per_rhs / times[0], speedup=times[0] / per_rhs,
                   max_fresh_difference=max(diffs.values()) if diffs else float("nan"))
    return ExperimentResult(["rhs_index", "angle_deg", "time", "fresh_difference"], rows,
                            summary)


def _omega_grid(cfg: ExperimentConfig, start: float, stop: float, step: float) -> np.ndarray:
    start = cfg.omega if cfg.omega is not None else start
    stop = cfg.omega_max if cfg.omega_max is not None else stop
    step = cfg.omega_step if cfg.omega_step is not None else step
    if step <= 0 or stop < start:
        raise ParameterError("need omega <= omega_max and a positive step")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def run_omega_suite(cfg: ExperimentConfig) -> ExperimentResult:
    """FDS and Conv time and FDS error against Conv over a range of omega."""
    N = cfg.n_elements or 1600
    eps = cfg.epsilon or 1e-8
    rows = []
    for omega in _omega_grid(cfg, 0.5, 8.0, 0.5):
        xc, tc, _ = conv_run(cfg, N, float(omega))
        x, tf, _ = fds_run(cfg, N, float(omega), eps)
        rows.append(dict(omega=float(omega), N=N, epsilon=eps, fds_time=tf, conv_time=tc,
                         relative_error=relative_error(x, xc)))
    return ExperimentResult(["omega", "N", "epsilon", "fds_time", "conv_time",
                             "relative_error"], rows)


def run_intensity_sweep(cfg: ExperimentConfig, solvers=None) -> ExperimentResult:
    """|u_1|^2 + |u_2|^2 at the boundary node nearest (1, 0) for each omega."""
    N = cfg.n_elements or 800
    eps = cfg.epsilon or 1e-8
    solvers = solvers or (cfg.solver,)
    node = nearest_node(cfg.mesh(N))
    rows = []
    for omega in _omega_grid(cfg, 0.5, 8.0, 0.05):
        for s in solvers:
            rcond = float("nan")
            if s == "fds":
                x, t, _ = fds_run(cfg, N, float(omega), eps)
            else:
                x, t, res = conv_run(cfg, N, float(omega), burton_miller=(s == "conv"),
                                     levels=0)
                rcond = res.rcond if res.rcond is not None else float("nan")
            rows.append(dict(omega=float(omega), solver=s, intensity=nodal_intensity(x, node),
                             time=t, rcond=rcond))
    return ExperimentResult(["omega", "solver", "intensity", "time", "rcond"], rows)


NULL_FIELD_LADDER = (400, 800, 1600)


def run_null_field(cfg: ExperimentConfig) -> ExperimentResult:
    omega = cfg.omega or 2.0
    eps = cfg.epsilon or 1e-10
    ladder = (cfg.n_elements,) if cfg.n_elements else NULL_FIELD_LADDER
    points = probe_points()
    if cfg.seed is not None:
        rot = np.random.default_rng(cfg.seed).uniform(0.0, 2 * np.pi / len(points))
        c, s = math.cos(rot), math.sin(rot)
        points = points @ np.array([[c, s], [-s, c]])
    rows = []
    for N in ladder:
        if cfg.solver == "fds":
            x, t, S = fds_run(cfg, N, omega, eps)
        else:
            x, t, _ = conv_run(cfg, N, omega, burton_miller=(cfg.solver == "conv"))
        res = null_field_residual(cfg.mesh(N), default_medium(omega), cfg.wave(), x, points)
        rows.append(dict(N=N, solver=cfg.solver, epsilon=eps, residual=res, time=t))
    ratios = [rows[i]["residual"] / rows[i + 1]["residual"] for i in range(len(rows) - 1)]
    return ExperimentResult(["N", "solver", "epsilon", "residual", "time"], rows,
                            {"reduction_factors": ratios})


def run(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.experiment in ("omega_time", "omega_error"):
        res = run_omega_suite(cfg)
        keep = ["omega", "N", "fds_time", "conv_time"] if cfg.experiment == "omega_time" \
            else ["omega", "N", "epsilon", "relative_error"]
        return ExperimentResult(keep, [{k: r[k] for k in keep} for r in res.rows], res.summary)
    return {
        "error_table": run_error_table,
        "single_level_error": run_single_level_error,
        "scaling": run_scaling,
        "multi_rhs": run_multi_rhs,
        "intensity_sweep": run_intensity_sweep,
        "null_field": run_null_field,
    }[cfg.experiment](cfg)
