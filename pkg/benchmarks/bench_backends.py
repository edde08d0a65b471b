"""Compare the compiled and numpy element-pair backends.

Times dense block assembly and a full FDS build + solve for each available
backend and reports the largest entrywise difference between them.

    python benchmarks/bench_backends.py [--sizes 200 400 800] [--repeat 3]
"""

import argparse
import statistics
import time

import numpy as np

from elastofds.assembly import Assembler, default_alpha
from elastofds.engine import available_backends
from elastofds.fds import FastDirectSolver
from elastofds.geometry import BoundaryCurve, build_mesh
from elastofds.medium import IncidentWave, default_medium


def median_run(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return out, statistics.median(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 800])
    p.add_argument("--omega", type=float, default=2.0)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--skip-fds", action="store_true")
    args = p.parse_args(argv)

    backends = available_backends()
    medium = default_medium(args.omega)
    alpha = default_alpha(medium)
    wave = IncidentWave()
    print(f"backends: {', '.join(backends)}")
    print(f"{'N':>6} {'stage':>8} " + " ".join(f"{b:>10}" for b in backends)
          + f" {'numpy/cc':>9} {'max diff':>10}")
    for N in args.sizes:
        mesh = build_mesh(BoundaryCurve(), N)
        nodes = np.arange(N)
        blocks, times = {}, {}
        for b in backends:
            asm = Assembler(mesh, medium, alpha, backend=b)
            blocks[b], times[b] = median_run(lambda: asm.block(nodes, nodes), args.repeat)
        diff = _diff(blocks)
        _row(N, "dense", backends, times, diff)

        if args.skip_fds or N % 4:
            continue
        levels = max(0, int(round(np.log2(N / 100))))
        sols = {}
        for b in backends:
            def build():
                S = FastDirectSolver(mesh, medium, levels, min(1, levels), 1e-8, backend=b)
                return S.solve_waves([wave])
            sols[b], times[b] = median_run(build, max(1, args.repeat - 1))
        _row(N, "fds", backends, times, _diff(sols))


def _diff(results):
    vals = list(results.values())
    if len(vals) < 2:
        return float("nan")
    return float(np.abs(vals[0] - vals[1]).max() / np.abs(vals[1]).max())


def _row(N, stage, backends, times, diff):
    ratio = times[backends[-1]] / times[backends[0]] if len(backends) > 1 else float("nan")
    print(f"{N:>6} {stage:>8} " + " ".join(f"{times[b]:>9.3f}s" for b in backends)
          + f" {ratio:>9.2f} {diff:>10.2e}", flush=True)


if __name__ == "__main__":
    main()
