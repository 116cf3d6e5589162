"""Command line interface.

Subcommands:
  validate  - check the configured metrics and print their convexity margins
  norming   - build and dump norming tables for both endpoint metrics
  geodesic  - evaluate the Bergman geodesic on the (t, rho) grid per degree
  converge  - run the full sweep, emit the report files and figures

Every failure exits nonzero after printing a single machine-readable JSON
error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import lab
from .geodesics import BergmanFreeEnergy, write_geodesic_csv
from .norming import TableCache, q_ratios, write_table_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toricgeo",
        description="Monge-Ampere geodesics of torus-invariant metrics and "
                    "their Bergman approximants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="flat key=value configuration file "
                             "(defaults are the shipped test metrics)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config output_dir)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for quadrature, 0 = auto")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table dump format for norming/geodesic")
    sub.add_parser("validate", parents=[common],
                   help="validate the configured metrics")
    sub.add_parser("norming", parents=[common],
                   help="emit norming tables for every scheduled degree")
    sub.add_parser("geodesic", parents=[common],
                   help="emit per-degree geodesic evaluation tables")
    converge = sub.add_parser("converge", parents=[common],
                              help="run the convergence sweep and emit the report")
    converge.add_argument("--no-figures", action="store_true",
                          help="skip rendering the PNG convergence figures")
    return parser


def _load_config(args) -> lab.ExperimentConfig:
    if args.config is None:
        config = lab.ExperimentConfig()
        config.validate()
    else:
        config = lab.parse_config(args.config)
    return config


def _outdir(args, config: lab.ExperimentConfig) -> Path:
    out = args.out if args.out is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _executor(args):
    workers = None if args.threads == 0 else args.threads
    if workers is not None and workers < 0:
        raise lab.ConfigError(f"--threads must be >= 0, got {workers}")
    if workers == 1:
        return None
    return ThreadPoolExecutor(max_workers=workers)


def _cmd_validate(args) -> int:
    config = _load_config(args)
    m0, m1 = config.metrics()
    print(f"m0 {m0.metric_id}: convexity margin {m0.convexity_margin:.12g}")
    print(f"m1 {m1.metric_id}: convexity margin {m1.convexity_margin:.12g}")
    return 0


def _dump_table_json(table, path: Path) -> None:
    payload = {
        "metric": table.metric_id,
        "N": table.n,
        "k": list(range(table.n + 1)),
        "alpha": [float(a) for a in table.alphas],
        "log_Qcal": [float(v) for v in table.log_Qcal],
        "log_Q": [float(v) for v in table.log_Q],
        "q": [float(v) for v in q_ratios(table)],
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _cmd_norming(args) -> int:
    config = _load_config(args)
    out = _outdir(args, config)
    cache = TableCache(tail_rtol=config.tolerance("quadrature"))
    executor = _executor(args)
    try:
        for label, metric in zip(("m0", "m1"), config.metrics()):
            for n in config.n_schedule:
                table = cache.table(metric, n, executor=executor)
                if args.format == "json":
                    _dump_table_json(table, out / f"norming_{label}_N{n}.json")
                else:
                    write_table_csv(table, out / f"norming_{label}_N{n}.csv")
    finally:
        if executor is not None:
            executor.shutdown()
    print(f"wrote {2 * len(config.n_schedule)} norming tables to {out}")
    return 0


def _cmd_geodesic(args) -> int:
    config = _load_config(args)
    out = _outdir(args, config)
    family = config.family()
    cache = TableCache(tail_rtol=config.tolerance("quadrature"))
    executor = _executor(args)
    try:
        for n in config.n_schedule:
            fe = BergmanFreeEnergy.from_tables(
                cache.family_table(family, 0.0, n, executor=executor),
                cache.family_table(family, 1.0, n, executor=executor))
            path = out / f"geodesic_N{n}.csv"
            write_geodesic_csv(path, family, fe, config.t_grid, config.rho_grid,
                               cache=cache, verify=True,
                               identity_tol=config.tolerance("identity"),
                               root_tol=config.tolerance("root"))
            if args.format == "json":
                _csv_to_json(path, out / f"geodesic_N{n}.json")
                path.unlink()
    finally:
        if executor is not None:
            executor.shutdown()
    print(f"wrote {len(config.n_schedule)} geodesic tables to {out}")
    return 0


def _csv_to_json(csv_path: Path, json_path: Path) -> None:
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    columns = {name: [] for name in header}
    for line in lines[1:]:
        for name, cell in zip(header, line.split(",")):
            columns[name].append(float(cell))
    with open(json_path, "w", encoding="utf-8", newline="") as fh:
        json.dump(columns, fh, indent=2)
        fh.write("\n")


def _cmd_converge(args) -> int:
    config = _load_config(args)
    out = _outdir(args, config)
    report = lab.run_convergence(config, threads=args.threads)
    paths = lab.emit_report(report, out)
    if not args.no_figures:
        from .figures import render_figures

        paths.extend(render_figures(report, out))
    for path in paths:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "norming": _cmd_norming,
    "geodesic": _cmd_geodesic,
    "converge": _cmd_converge,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # every failure becomes one parseable line
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
