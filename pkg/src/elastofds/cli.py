"""Command-line driver: ``elastofds <experiment> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, SOLVERS, ExperimentConfig, run, write_result
from .medium import ParameterError

log = logging.getLogger("elastofds")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elastofds",
                                description="Fast direct BEM experiments for elastic scattering")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--n-elements", type=int)
        s.add_argument("--leaf-size", type=int, default=100)
        s.add_argument("--levels", type=int)
        s.add_argument("--ell0", type=int, default=1)
        s.add_argument("--epsilon", type=float)
        s.add_argument("--omega", type=float)
        s.add_argument("--omega-max", type=float)
        s.add_argument("--omega-step", type=float)
        s.add_argument("--alpha-re", type=float)
        s.add_argument("--alpha-im", type=float)
        s.add_argument("--incident-angle-deg", type=float, default=0.0)
        s.add_argument("--rhs-count", type=int)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--proxy-radius-factor", type=float, default=1.5)
        s.add_argument("--proxy-m", type=int, default=64)
        s.add_argument("--solver", choices=SOLVERS, default="fds")
        s.add_argument("--out", help="CSV path; the JSON config echo is written beside it")
        s.add_argument("--seed", type=int)
        s.add_argument("--mesh-file", help="node file: a line with N, then N lines 'x1 x2'")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    fields = {k: v for k, v in vars(args).items() if k != "verbose"}
    try:
        cfg = ExperimentConfig(**fields)
        result = run(cfg)
    except ParameterError as exc:
        print(f"elastofds: {exc}", file=sys.stderr)
        return 2
    path = write_result(result, cfg, cfg.out or f"{cfg.experiment}.csv")
    log.info("wrote %s", path)
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
