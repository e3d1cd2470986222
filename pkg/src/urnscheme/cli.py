"""Command-line entry point: ``urnscheme {theory,simulate,gp,verify,estimate}``.

Exit codes: 0 success, 1 a verification criterion failed (or a numerical
failure), 2 usage or configuration error.  Every file written is printed on
standard output, one path per line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .config import OUT_DIR_ENV, ConfigError, load_config
from .errors import NumericalError, UrnSchemeError
from .gp import build_kernel_matrix, sample_gaussian_paths, sample_wiener
from .model import make_zipf
from .sim import run_replications
from .theory import cov_exact_poissonized, cov_limit, moment_table, theorem2_identity_residual
from .verify import ExperimentConfig, ExperimentReport, estimate_theta, run_experiment

DEFAULT_OUT_DIR = "urnscheme-out"


# --- formatting -------------------------------------------------------------------

def fmt(x) -> str:
    """CSV cell: integers verbatim, reals with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def jsonable(x):
    """JSON value carrying exactly the number printed by :func:`fmt`."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if not math.isfinite(x) else float(format(x, ".17g"))
    return x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def _write(out_dir, name, text) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(path)
    return path


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def _out_dir(args, fallback=None) -> str:
    if args.out_dir:
        return args.out_dir
    if fallback:
        return fallback
    return os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR)


# --- report tables -------------------------------------------------------------------

def report_tables(report: ExperimentReport) -> dict[str, tuple[list[str], list[list]]]:
    cov_rows = []
    for a, (i, tau) in enumerate(report.coordinates):
        for b, (j, t) in enumerate(report.coordinates):
            theory = report.theory_cov[a, b] if report.theory_cov is not None else math.nan
            rel = report.relative_error[a, b] if report.relative_error is not None else math.nan
            cov_rows.append([i, tau, j, t, report.empirical_cov[a, b], report.cov_se[a, b], theory, rel])
    crit_rows = [[c.name, c.value, c.threshold, c.passed, c.detail] for c in report.criteria]
    tables = {
        "covariance": (["i", "tau", "j", "t", "empirical", "se", "theory", "relative_error"], cov_rows),
        "criteria": (["criterion", "value", "threshold", "passed", "detail"], crit_rows),
    }
    if report.ks:
        tables["ks"] = (["component", "sigma", "statistic", "p_value"],
                        [[k.component, k.sigma, k.statistic, k.p_value] for k in report.ks])
    if report.exact_k:
        tables["exact_k"] = (["r_i", "r_j", "empirical", "se", "theory"],
                             [[e["r_i"], e["r_j"], e["empirical"], e["se"], e["theory"]]
                              for e in report.exact_k])
    return tables


def report_dict(report: ExperimentReport, cfg: ExperimentConfig) -> dict:
    tables = report_tables(report)
    return {
        "config": {
            "distribution": {k: v for k, v in vars(cfg.distribution).items() if v is not None},
            "n": cfg.n, "grid": list(cfg.grid), "kmax": cfg.kmax, "regime": cfg.regime.value,
            "m_reps": cfg.m_reps, "master_seed": cfg.master_seed,
            "tolerances": vars(cfg.tolerances),
        },
        "theta": report.theta,
        "theta_estimate": report.theta_estimate,
        "clt": report.clt,
        "wiener": report.wiener,
        "flags": report.flags,
        "passed": report.passed,
        "tables": {name: [dict(zip(h, row)) for row in rows] for name, (h, rows) in tables.items()},
    }


# --- subcommands --------------------------------------------------------------------

def cmd_theory(args) -> int:
    if not args.table:
        print(fmt(cov_limit(args.i, args.j, args.tau, args.t, args.theta)))
        return 0
    grid = args.grid
    d = make_zipf(args.theta) if args.n else None
    alpha_n = float(d.alpha(args.n)) if d is not None else math.nan
    header = ["i", "j", "tau", "t", "theta", "c_star", "c_tilde_over_alpha", "residual"]
    rows = []
    for i in range(1, args.nu + 1):
        for j in range(1, args.nu + 1):
            for tau in grid:
                for t in grid:
                    c = cov_limit(i, j, tau, t, args.theta)
                    if d is not None:
                        ct = cov_exact_poissonized(i, j, args.n * tau, args.n * t, d) / alpha_n
                        resid = ct - c
                    else:
                        ct = resid = math.nan
                    rows.append([i, j, tau, t, args.theta, c, ct, resid])
    out = _out_dir(args)
    if args.format == "json":
        _write(out, "theory.json", json_text([dict(zip(header, r)) for r in rows]))
    else:
        _write(out, "theory.csv", csv_text(header, rows))
    if args.identity:
        id_rows = [[i, j, args.theta, theorem2_identity_residual(i, j, args.theta)]
                   for i in range(1, args.nu + 1) for j in range(1, args.nu + 1)]
        _write(out, "theory_identity.csv", csv_text(["i", "j", "theta", "residual"], id_rows))
    return 0


def _experiment(args) -> ExperimentConfig:
    cf = load_config(args.config)
    return ExperimentConfig.from_file(cf, seed=args.seed, out_dir=_out_dir(args, cf.output.directory))


def _formats(args, cfg: ExperimentConfig):
    return (args.format,) if args.format else cfg.formats


def cmd_simulate(args) -> int:
    cfg = _experiment(args)
    d = cfg.distribution.build()
    table = moment_table(d, cfg.n, cfg.grid, cfg.kmax)
    raw = run_replications(d, cfg.n, cfg.grid, cfg.kmax, cfg.regime, cfg.m_reps,
                           cfg.master_seed, args.threads)
    norm = (raw - table.for_regime(cfg.regime)[None]) / math.sqrt(table.alpha_n)
    header = ["rep", "t", "k", "r_star", "normalized"]
    rows = [[r, t, k + 1, raw[r, g, k], norm[r, g, k]]
            for r in range(raw.shape[0]) for g, t in enumerate(cfg.grid) for k in range(cfg.kmax)]
    summary_header = ["t", "k", "expected", "mean_normalized", "var_normalized"]
    summary = [[t, k + 1, table.for_regime(cfg.regime)[g, k], norm[:, g, k].mean(),
                norm[:, g, k].var(ddof=1)]
               for g, t in enumerate(cfg.grid) for k in range(cfg.kmax)]
    for f in _formats(args, cfg):
        if f == "csv":
            _write(cfg.out_dir, "paths.csv", csv_text(header, rows))
            _write(cfg.out_dir, "paths_summary.csv", csv_text(summary_header, summary))
        else:
            _write(cfg.out_dir, "paths.json", json_text({
                "alpha_n": table.alpha_n,
                "paths": [dict(zip(header, r)) for r in rows],
                "summary": [dict(zip(summary_header, r)) for r in summary]}))
    return 0


def cmd_gp(args) -> int:
    out = _out_dir(args)
    grid = args.grid
    if args.theta == 1.0:
        paths = sample_wiener(grid, args.reps, args.seed)[:, :, None]
        nu, kernel_rows = 1, [[a, b, 1, s, 1, t, min(s, t)] for a, s in enumerate(grid)
                              for b, t in enumerate(grid)]
    else:
        km = build_kernel_matrix(grid, args.nu, args.theta)
        paths = sample_gaussian_paths(km, args.reps, args.seed)
        nu = args.nu
        coords = [(k, t) for t in grid for k in range(1, nu + 1)]
        kernel_rows = [[a, b, coords[a][0], coords[a][1], coords[b][0], coords[b][1], km.matrix[a, b]]
                       for a in range(len(coords)) for b in range(len(coords))]
    kernel_header = ["row", "col", "i", "tau", "j", "t", "value"]
    path_header = ["rep", "t", "k", "value"]
    path_rows = [[r, t, k + 1, paths[r, g, k]] for r in range(paths.shape[0])
                 for g, t in enumerate(grid) for k in range(nu)]
    if args.format == "json":
        _write(out, "gp.json", json_text({
            "kernel": [dict(zip(kernel_header, r)) for r in kernel_rows],
            "paths": [dict(zip(path_header, r)) for r in path_rows]}))
    else:
        _write(out, "gp_kernel.csv", csv_text(kernel_header, kernel_rows))
        _write(out, "gp_paths.csv", csv_text(path_header, path_rows))
    return 0


def cmd_verify(args) -> int:
    cfg = _experiment(args)
    report = run_experiment(cfg, threads=args.threads)
    for f in _formats(args, cfg):
        if f == "json":
            _write(cfg.out_dir, "report.json", json_text(report_dict(report, cfg)))
        else:
            for name, (header, rows) in report_tables(report).items():
                _write(cfg.out_dir, f"report_{name}.csv", csv_text(header, rows))
    for c in report.criteria:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={fmt(c.value)} "
              f"threshold={fmt(c.threshold)}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_estimate(args) -> int:
    if args.config:
        cfg = _experiment(args)
        d = cfg.distribution.build()
        raw = run_replications(d, cfg.n, (1.0,), 1, cfg.regime, cfg.m_reps, cfg.master_seed,
                               args.threads)
        est = [estimate_theta(int(r), cfg.n) for r in raw[:, -1, 0] if r >= 1]
        print(fmt(float(np.mean(est))))
        return 0
    if args.r_n is None or args.n is None:
        raise UsageError("estimate needs either --config or both --r-n and --n")
    print(fmt(estimate_theta(args.r_n, args.n)))
    return 0


# --- argument parsing ---------------------------------------------------------------

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    common.add_argument("--out-dir", default=None,
                        help=f"output directory (default: config, then ${OUT_DIR_ENV}, then {DEFAULT_OUT_DIR})")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="output format")

    p = _Parser(prog="urnscheme", description="Infinite urn occupancy scheme toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    th = sub.add_parser("theory", parents=[common], help="limit covariance kernel values and tables")
    th.add_argument("--theta", type=float, required=True)
    th.add_argument("--i", type=int, default=1)
    th.add_argument("--j", type=int, default=1)
    th.add_argument("--tau", type=float, default=1.0)
    th.add_argument("--t", type=float, default=1.0)
    th.add_argument("--table", action="store_true", help="write a kernel table instead of one value")
    th.add_argument("--nu", type=int, default=2, help="levels in the table")
    th.add_argument("--grid", type=_grid, default=(0.25, 0.5, 0.75, 1.0))
    th.add_argument("--n", type=int, default=None, help="add exact finite-n values for Zipf(theta)")
    th.add_argument("--identity", action="store_true", help="also write exact-k identity residuals")
    th.set_defaults(func=cmd_theory)

    sm = sub.add_parser("simulate", parents=[common], help="simulate occupancy paths from a config")
    sm.add_argument("config")
    sm.set_defaults(func=cmd_simulate)

    gp = sub.add_parser("gp", parents=[common], help="sample the Gaussian limit on a grid")
    gp.add_argument("--theta", type=float, required=True, help="theta in (0,1), or 1 for Wiener")
    gp.add_argument("--nu", type=int, default=1)
    gp.add_argument("--grid", type=_grid, default=(0.25, 0.5, 0.75, 1.0))
    gp.add_argument("--reps", type=int, default=10)
    gp.set_defaults(func=cmd_gp)

    vf = sub.add_parser("verify", parents=[common], help="Monte-Carlo verification from a config")
    vf.add_argument("config")
    vf.set_defaults(func=cmd_verify)

    es = sub.add_parser("estimate", parents=[common], help="log-ratio estimate of theta")
    es.add_argument("--r-n", type=int, default=None)
    es.add_argument("--n", type=int, default=None)
    es.add_argument("--config", default=None, help="simulate from a config and average the estimate")
    es.set_defaults(func=cmd_estimate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.seed is None:
        args.seed = 0 if args.command == "gp" else None
    if args.threads < 1:
        print("urnscheme: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except (UsageError, OSError) as exc:
        print(f"urnscheme: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1
    except UrnSchemeError as exc:
        print(f"urnscheme: {exc}", file=sys.stderr)
        return 2


def main_entry():
    sys.exit(main())
