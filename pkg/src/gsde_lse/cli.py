"""Command-line driver.

    gsde-lse table1   [--n 10000 50000] [--J 512] ...
    gsde-lse table2   [--J 8 16 32 64 128] [--T 50] ...
    gsde-lse custom   --config model.toml
    gsde-lse verify   [--out reports.json]
    gsde-lse simulate --n 100 --m 2 --J 1 --out paths.csv

Results go to stdout (or ``--out``); progress and logs go to stderr.
Exit codes: 0 success, 2 configuration error, 3 simulation divergence.
"""

import argparse
from dataclasses import replace
import logging
import sys

from .errors import ConfigError, GsdeError, SimulationDiverged
from .estimators import write_envelope_csv, write_estimates_csv
from .experiment import ExperimentConfig, format_table, run_custom, run_table1, run_table2
from .inequalities import (dump_reports, verify_bdg_moment, verify_ergodic_envelope,
                           verify_exp_martingale, verify_increment_moments)
from .simulate import GridConfig, scenario_paths, simulate_path, write_paths_csv
from .streams import path_stream

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("gsde_lse")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with experiment settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--m", type=int, help="number of volatility scenarios")
    common.add_argument("--J", type=int, nargs="+", help="replicates per scenario (list for table2)")
    common.add_argument("--n", type=int, nargs="+", help="number of steps (list for table1/custom)")
    common.add_argument("--dt", type=float)
    common.add_argument("--T", type=float, help="horizon for table2 (n = T / dt)")
    common.add_argument("--theta0", type=float)
    common.add_argument("--sigma2-lo", type=float, dest="sigma2_lo")
    common.add_argument("--sigma2-hi", type=float, dest="sigma2_hi")
    common.add_argument("--threads", type=int)
    common.add_argument("--time-scaling", choices=["linear", "sqrt"], dest="time_scaling",
                        help="linear: T = n*dt; sqrt: T = dt*sqrt(n)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--estimates", help="prefix for per-round k,j,theta_hat CSV files")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gsde-lse", description="LSE of G-SDE drift parameters")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("table1", parents=[common], help="envelope vs n")
    sub.add_parser("table2", parents=[common], help="envelope vs J")
    sub.add_parser("custom", parents=[common], help="envelope with the numerical argmin estimator")
    v = sub.add_parser("verify", parents=[common], help="run the inequality checks")
    v.add_argument("--trials", type=int, default=None, help="override every check's trial count")
    sub.add_parser("simulate", parents=[common], help="dump simulated paths as CSV")
    return p


def load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = ExperimentConfig.from_mapping(data)
    over = {}
    for key in ("seed", "m", "dt", "T", "theta0", "sigma2_lo", "sigma2_hi", "threads", "time_scaling"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    if args.n:
        over["n_values"] = tuple(args.n)
    if args.J:
        if args.command == "table2":
            over["J_values"] = tuple(args.J)
        elif len(args.J) != 1:
            raise ConfigError("--J takes a single value for this command")
        else:
            over["J"] = args.J[0]
    return replace(cfg, **over)


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _emit_rows(rows, args, key):
    fh = _open_out(args.out)
    try:
        write_envelope_csv(fh, rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(format_table(rows, key), file=sys.stderr)
    if args.estimates:
        for r in rows:
            if r.records is None:
                continue
            with open(f"{args.estimates}_n{r.n}_J{r.J}.csv", "w", newline="") as fh:
                write_estimates_csv(fh, r.records)


def cmd_table(args, cfg):
    keep = bool(args.estimates)
    if args.command == "table1":
        rows, key = run_table1(cfg, keep), "n"
    elif args.command == "table2":
        rows, key = run_table2(cfg, keep), "J"
    else:
        rows, key = run_custom(cfg, keep), "n"
    _emit_rows(rows, args, key)


def default_reports(cfg, trials=None):
    """The standard battery of inequality checks for the configured model."""
    model = cfg.build_model()
    seed = cfg.seed
    t = (lambda d: d) if trials is None else (lambda d: trials)
    gaps = [(0.0, h) for h in (0.01, 0.02, 0.05, 0.1)]
    return [
        verify_exp_martingale(model.var_interval, lambda s: 1.0, 1.0, 2.0, 2.0, t(100_000), seed),
        verify_bdg_moment(model, 2.0, (0.0, 1.0), t(20_000), seed),
        verify_bdg_moment(model, 4.0, (0.0, 1.0), t(20_000), seed),
        verify_increment_moments(model, 1, gaps, t(10_000), seed),
        verify_increment_moments(model, 2, gaps, t(10_000), seed),
        verify_ergodic_envelope(model, GridConfig(n=int(round(5000 / cfg.dt)), dt=cfg.dt, m=5, J=1, seed=seed),
                                lambda x: x * x),
    ]


def cmd_verify(args, cfg):
    reports = default_reports(cfg, args.trials)
    for r in reports:
        print(r.summary())
    if args.out:
        with open(args.out, "w") as fh:
            dump_reports(reports, fh)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def cmd_simulate(args, cfg):
    model = cfg.build_model()
    n = cfg.n_values[0] if args.n else 1000
    J = cfg.J if args.J else 1
    grid = cfg.grid(n, J)
    scen = scenario_paths(model, grid.m, grid.n)
    paths = []
    for k in range(grid.m):
        for j in range(grid.J):
            try:
                p = simulate_path(model, scen[k], grid, path_stream(grid.seed, n, J, k, j))
            except SimulationDiverged as exc:
                raise SimulationDiverged(exc.step, exc.value, {"k": k, "j": j}) from None
            paths.append(((k, j), p))
    fh = _open_out(args.out)
    try:
        write_paths_csv(fh, paths)
    finally:
        if fh is not sys.stdout:
            fh.close()


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger("gsde_lse").setLevel(logging.INFO)
        cfg = load_config(args)
        if args.command in ("table1", "table2", "custom"):
            cmd_table(args, cfg)
            return EXIT_OK
        if args.command == "verify":
            return cmd_verify(args, cfg)
        cmd_simulate(args, cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except GsdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
