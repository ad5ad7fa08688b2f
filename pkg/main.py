# main.py
"""
Quantrix experiment runner.

    python main.py qdp|qtd|field|bound|backup|trajectory --config <path> --out <dir>
                   [--seed-override N] [--grid x0:x1:n,y0:y1:n]

Exit codes: 0 success, 2 config error, 3 non-convergence, 4 any other model/runtime error.
"""
import argparse
import asyncio
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from config import LOG_FORMAT, LOG_LEVEL, OUTPUT_DIR
from core.analysis import backup_diagram, check_w1_bound
from core.dynamics import euler_integrate, vector_field
from core.errors import ConfigError, NonConvergenceError, QuantrixError
from core.experiment import (
    ExperimentConfig,
    build_init,
    build_lambdas,
    build_mrp,
    load_config,
    parse_grid,
    run_all_seeds,
)
from core.qdp import qdp_solve
from core.qtd import make_rng
from core.quantiles import QuantileTable
from core.reports import (
    ensure_output_dir,
    write_backup,
    write_bound,
    write_field,
    write_fixed_point,
    write_summary,
    write_text,
    write_trajectory,
)

logger = logging.getLogger("quantrix")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_RUNTIME = 4


# ---------------- Commands ----------------
def _solve(config: ExperimentConfig, mrp, lam, init: Optional[QuantileTable] = None) -> QuantileTable:
    tol = config.tolerances
    init = build_init(config, mrp) if init is None else init
    table, _ = qdp_solve(mrp, lam, init, tol.qdp_tol_inf, tol.max_iters, tol.bisection_tol, polish=True)
    return table


def cmd_qdp(config: ExperimentConfig, out_dir: str, args) -> int:
    logger.info("--- Solving QDP ---")
    mrp = build_mrp(config)
    lambdas = build_lambdas(config, mrp.num_states)
    init = build_init(config, mrp)
    tol = config.tolerances
    iters: List[int] = []
    for k, lam in enumerate(lambdas):
        try:
            table, n = qdp_solve(mrp, lam, init, tol.qdp_tol_inf, tol.max_iters, tol.bisection_tol, polish=True)
        except NonConvergenceError as e:
            # Keep the last iterate for inspection before reporting the failure.
            if e.table is not None:
                write_fixed_point(e.table, mrp.state_names, os.path.join(out_dir, "fixed_point.csv"))
            write_text(os.path.join(out_dir, "iters.txt"), "\n".join(str(v) for v in iters + [e.iters]))
            raise
        iters.append(n)
        if k == 0:
            write_fixed_point(table, mrp.state_names, os.path.join(out_dir, "fixed_point.csv"))
        if len(lambdas) > 1:
            write_fixed_point(table, mrp.state_names, os.path.join(out_dir, f"fixed_point_lambda{k}.csv"))
    write_text(os.path.join(out_dir, "iters.txt"), "\n".join(str(v) for v in iters))
    logger.info("QDP solved for %d lambda(s); iterations %s", len(lambdas), iters)
    return EXIT_OK


def cmd_qtd(config: ExperimentConfig, out_dir: str, args) -> int:
    if config.algo == "qdp":
        raise ConfigError("the qtd command needs algo qtd-sync, qtd-async, td or mc", "algo")
    logger.info("--- Running %s ---", config.algo)
    mrp = build_mrp(config)
    seeds = [args.seed_override] if args.seed_override is not None else config.seeds
    results = asyncio.run(run_all_seeds(config, mrp, seeds, out_dir))
    write_summary(results, os.path.join(out_dir, "summary.csv"))
    for seed, distance, metric in sorted(results):
        logger.info("seed %d: %s = %.4g", seed, metric, distance)
    return EXIT_OK


def cmd_field(config: ExperimentConfig, out_dir: str, args) -> int:
    mrp = build_mrp(config)
    if mrp.num_states * config.m != 2:
        raise ConfigError(f"field dumps need exactly two coordinates, got {mrp.num_states} states x m={config.m}",
                          "m")
    grid = args.grid or config.grid
    if grid is None:
        raise ConfigError("no grid given (use --grid x0:x1:n,y0:y1:n or the 'grid' key)", "grid")
    logger.info("--- Evaluating expected-update field on %s ---", grid)
    field = vector_field(mrp, parse_grid(grid), QuantileTable.full(mrp.num_states, config.m))
    write_field(field, os.path.join(out_dir, "field.csv"))
    return EXIT_OK


def cmd_bound(config: ExperimentConfig, out_dir: str, args) -> int:
    logger.info("--- Checking the w1 fixed-point bound ---")
    mrp = build_mrp(config)
    lam = build_lambdas(config, mrp.num_states)[0]
    seed = args.seed_override if args.seed_override is not None else config.analysis.seed
    report = check_w1_bound(mrp, config.m, lam, config.analysis.n_samples, make_rng(seed),
                            config.analysis.horizon, config.analysis.bootstrap)
    write_bound(report, os.path.join(out_dir, "bound.txt"))
    return EXIT_OK


def cmd_backup(config: ExperimentConfig, out_dir: str, args) -> int:
    logger.info("--- Building the local quantile back-up diagram ---")
    mrp = build_mrp(config)
    table = _solve(config, mrp, build_lambdas(config, mrp.num_states)[0])
    diagram = backup_diagram(mrp, table, config.analysis.match_tol)
    write_backup(diagram, os.path.join(out_dir, "backup.csv"))
    return EXIT_OK


def cmd_trajectory(config: ExperimentConfig, out_dir: str, args) -> int:
    logger.info("--- Integrating the mean QTD dynamics ---")
    mrp = build_mrp(config)
    trajectory = euler_integrate(mrp, build_init(config, mrp), config.dynamics.dt, config.dynamics.horizon)
    write_trajectory(trajectory, mrp.state_names, os.path.join(out_dir, "trajectory.csv"))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[ExperimentConfig, str, argparse.Namespace], int]] = {
    "qdp": cmd_qdp,
    "qtd": cmd_qtd,
    "field": cmd_field,
    "bound": cmd_bound,
    "backup": cmd_backup,
    "trajectory": cmd_trajectory,
}


# ---------------- Entry point ----------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Quantile TD / quantile DP experiment runner")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="Path to the JSON experiment config")
    parser.add_argument("--out", default=OUTPUT_DIR, help="Output directory")
    parser.add_argument("--seed-override", type=int, default=None, help="Run this single seed instead")
    parser.add_argument("--grid", default=None, help="Field grid as x0:x1:n,y0:y1:n")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)

    try:
        config = load_config(args.config)
    except ConfigError as e:
        logger.error("Config error: %s", e)
        return EXIT_CONFIG

    out_dir = ensure_output_dir(args.out)
    try:
        return COMMANDS[args.command](config, out_dir, args)
    except ConfigError as e:
        logger.error("Config error: %s", e)
        return EXIT_CONFIG
    except NonConvergenceError as e:
        logger.error("Did not converge: %s", e)
        return EXIT_NONCONVERGENCE
    except QuantrixError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
