"""Experiment configuration, convergence sweeps and report emission.

The lab drives everything end to end for a pair of metrics: it builds the
norming tables over a degree schedule, evaluates the Bergman geodesic
against the exact Monge-Ampere geodesic on a (t, rho) grid, aggregates the
C0 / C2 / ratio error channels per degree, fits empirical rates, and writes
the report as delimited files plus a JSON summary.  The sweep is a pure
function of the configuration: reruns (at any thread count) produce
byte-identical delimited output.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .geodesics import BergmanFreeEnergy, e_function, free_energy, moments
from .norming import TableCache, canonical_log_q, omega_vector, r_ratio
from .potentials import (GeodesicFamily, MetricPotential, geodesic_metric,
                         ma_derivatives, make_family, make_metric)

# Interior window in the moment coordinate for the second-derivative channels.
INTERIOR_WINDOW = (0.2, 0.8)

_DEFAULT_TOLERANCES = {"root": 1e-12, "quadrature": 1e-14, "identity": 1e-8}


class ConfigError(ValueError):
    """A configuration file or field is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one convergence experiment."""

    f0_coeffs: tuple[float, ...] = (0.0, 0.0, 0.25)
    f1_coeffs: tuple[float, ...] = (0.0, 0.0, -0.15, 0.3)
    n_schedule: tuple[int, ...] = (16, 32, 64, 128, 256, 512, 1024)
    t_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    rho_grid: tuple[float, ...] = tuple(np.linspace(-8.0, 8.0, 33))
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    output_dir: str = "out"
    grid_resolution: int = 2001

    def validate(self) -> None:
        if len(self.n_schedule) < 1 or any(n < 1 for n in self.n_schedule):
            raise ConfigError(f"n_schedule must be positive integers, got {self.n_schedule}")
        if list(self.n_schedule) != sorted(set(self.n_schedule)):
            raise ConfigError("n_schedule must be strictly increasing")
        if any(not 0.0 <= t <= 1.0 for t in self.t_grid):
            raise ConfigError(f"t_grid values must lie in [0, 1], got {self.t_grid}")
        if len(self.rho_grid) < 1:
            raise ConfigError("rho_grid must be non-empty")
        unknown = set(self.tolerances) - set(_DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance names: {sorted(unknown)}")
        if any(v <= 0 for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        if self.grid_resolution < 1000:
            raise ConfigError(
                f"grid_resolution must be >= 1000, got {self.grid_resolution}")

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, _DEFAULT_TOLERANCES[name]))

    def metrics(self) -> tuple[MetricPotential, MetricPotential]:
        m0 = make_metric(self.f0_coeffs, self.grid_resolution)
        m1 = make_metric(self.f1_coeffs, self.grid_resolution)
        return m0, m1

    def family(self) -> GeodesicFamily:
        return make_family(*self.metrics())


_LIST_KEYS = {"f0_coeffs", "f1_coeffs", "n_schedule", "t_grid", "rho_grid"}
_SCALAR_KEYS = {"rho_min", "rho_max", "rho_count", "tol_root", "tol_quadrature",
                "tol_identity", "output_dir", "grid_resolution"}


def parse_config(path) -> ExperimentConfig:
    """Parse a flat key = value configuration file.

    Lists are comma separated; ``rho_grid`` may be given explicitly or via
    rho_min / rho_max / rho_count; '#' starts a comment.  Unknown keys are
    rejected.
    """
    raw: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, value = body.split("=", 1)
        key = key.strip().lower()
        if key not in _LIST_KEYS | _SCALAR_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    def floats(key: str) -> tuple[float, ...]:
        try:
            return tuple(float(v) for v in raw[key].split(","))
        except ValueError as exc:
            raise ConfigError(f"{path}: key {key!r}: {exc}") from None

    kwargs: dict = {}
    for key in ("f0_coeffs", "f1_coeffs", "t_grid"):
        if key in raw:
            kwargs[key] = floats(key)
    if "n_schedule" in raw:
        values = floats("n_schedule")
        if any(v != int(v) for v in values):
            raise ConfigError(f"{path}: n_schedule entries must be integers")
        kwargs["n_schedule"] = tuple(int(v) for v in values)
    if "rho_grid" in raw:
        kwargs["rho_grid"] = floats("rho_grid")
    elif {"rho_min", "rho_max", "rho_count"} & raw.keys():
        lo = float(raw.get("rho_min", -8.0))
        hi = float(raw.get("rho_max", 8.0))
        count = int(float(raw.get("rho_count", 33)))
        if count < 1 or hi < lo:
            raise ConfigError(f"{path}: invalid rho grid bounds/count")
        kwargs["rho_grid"] = tuple(np.linspace(lo, hi, count))
    tol = dict(_DEFAULT_TOLERANCES)
    for name in ("root", "quadrature", "identity"):
        key = f"tol_{name}"
        if key in raw:
            tol[name] = float(raw[key])
    kwargs["tolerances"] = tol
    if "output_dir" in raw:
        kwargs["output_dir"] = raw["output_dir"]
    if "grid_resolution" in raw:
        kwargs["grid_resolution"] = int(float(raw["grid_resolution"]))
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


@dataclass(frozen=True)
class RateFit:
    """Least-squares rate fit of an error sequence against the degree."""

    slope: float
    log_corrected: tuple[float, ...]


def fit_rate(errors, ns) -> RateFit:
    """Fit log(err) ~ slope * log(N) and report err * N / log N per degree.

    Requires at least three aligned positive samples.  The log-corrected
    channel is infinite at N = 1 (log N vanishes there).
    """
    errors = np.asarray(errors, dtype=float)
    ns = np.asarray(ns, dtype=float)
    if errors.shape != ns.shape or errors.size < 3:
        raise ValueError("need at least three aligned (error, N) samples")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be strictly positive to fit a rate")
    slope = float(np.polyfit(np.log(ns), np.log(errors), 1)[0])
    with np.errstate(divide="ignore"):
        corrected = errors * ns / np.log(ns)
    return RateFit(slope=slope, log_corrected=tuple(float(c) for c in corrected))


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-degree error channels of one sweep plus fitted rates.

    c2_err_* are the sups of the raw channel gaps over the interior grid;
    q_err and boundary_q_err are sups over the geodesic time grid.
    """

    n_schedule: tuple[int, ...]
    c0_err: tuple[float, ...]
    c2_err_rho: tuple[float, ...]
    c2_err_tt: tuple[float, ...]
    c2_err_mixed: tuple[float, ...]
    q_err: tuple[float, ...]
    boundary_q_err: tuple[float, ...]
    fitted_rates: dict


def _sweep_degree(family: GeodesicFamily, cache: TableCache, n: int,
                  t_grid, rho_grid, root_tol: float, identity_tol: float,
                  executor=None) -> dict:
    """All error channels of one degree.  Pure; deterministic."""
    table0 = cache.family_table(family, 0.0, n, executor=executor)
    table1 = cache.family_table(family, 1.0, n, executor=executor)
    fe = BergmanFreeEnergy.from_tables(table0, table1)
    log_qp = canonical_log_q(n)
    lo, hi = INTERIOR_WINDOW
    c0 = 0.0
    c2_rho = c2_tt = c2_mixed = 0.0
    q_err = 0.0
    boundary = 0.0
    for t in t_grid:
        table_t = cache.family_table(family, t, n, executor=executor)
        # Ratio route consistency is asserted once per (t, N).
        r_ratio(table_t, table0, table1, t, identity_tol=identity_tol)
        metric_t = geodesic_metric(family, t)
        q = np.exp(table_t.log_Q - log_qp)
        q_err = max(q_err, float(np.max(np.abs(q - omega_vector(metric_t, table_t.alphas)))))
        boundary = max(boundary, abs(float(q[1]) - 1.0))
        for rho in rho_grid:
            bundle = ma_derivatives(family, t, rho, tol=root_tol)
            u = free_energy(fe, t, rho)
            c0 = max(c0, abs(u - bundle.U))
            e_function(family, fe, t, rho, cache=cache, verify=True,
                       identity_tol=identity_tol, root_tol=root_tol)
            if lo <= bundle.x <= hi:
                mom = moments(fe, t, rho)
                c2_rho = max(c2_rho, abs(mom.d2_rho - bundle.d2U_drho2))
                c2_tt = max(c2_tt, abs(mom.d2_t - bundle.d2U_dt2))
                c2_mixed = max(c2_mixed, abs(mom.cov_alpha_d - (-bundle.d2U_dtdrho)))
    return {"c0": c0, "c2_rho": c2_rho, "c2_tt": c2_tt, "c2_mixed": c2_mixed,
            "q": q_err, "boundary": boundary}


def run_convergence(config: ExperimentConfig, threads: int = 1,
                    cache: TableCache | None = None) -> ConvergenceReport:
    """Run the full convergence sweep described by the configuration.

    ``threads`` only distributes the quadrature work (0 = one worker per
    CPU); results are reassembled in schedule order, so the report does not
    depend on the worker count.
    """
    config.validate()
    family = config.family()
    if cache is None:
        cache = TableCache(tail_rtol=config.tolerance("quadrature"))
    root_tol = config.tolerance("root")
    identity_tol = config.tolerance("identity")
    workers = os.cpu_count() if threads == 0 else threads
    executor = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        per_degree = [
            _sweep_degree(family, cache, n, config.t_grid, config.rho_grid,
                          root_tol, identity_tol, executor=executor)
            for n in config.n_schedule
        ]
    finally:
        if executor is not None:
            executor.shutdown()
    ns = np.asarray(config.n_schedule, dtype=float)
    c0 = tuple(d["c0"] for d in per_degree)
    q_err = tuple(d["q"] for d in per_degree)
    boundary = tuple(d["boundary"] for d in per_degree)
    rates: dict = {}
    if len(config.n_schedule) >= 3:
        if min(c0) > 0.0:
            fit = fit_rate(c0, ns)
            rates["c0_slope"] = fit.slope
            rates["c0_log_corrected"] = list(fit.log_corrected)
        if min(q_err) > 0.0:
            rates["q_slope"] = fit_rate(q_err, ns).slope
        if min(boundary) > 0.0:
            rates["boundary_q_slope"] = fit_rate(boundary, ns).slope
    return ConvergenceReport(
        n_schedule=tuple(int(n) for n in config.n_schedule),
        c0_err=c0,
        c2_err_rho=tuple(d["c2_rho"] for d in per_degree),
        c2_err_tt=tuple(d["c2_tt"] for d in per_degree),
        c2_err_mixed=tuple(d["c2_mixed"] for d in per_degree),
        q_err=q_err,
        boundary_q_err=boundary,
        fitted_rates=rates,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [str(row[0])] + [f"{v:.17g}" for v in row[1:]]
            fh.write(",".join(cells) + "\n")


def emit_report(report: ConvergenceReport, output_dir) -> list[Path]:
    """Write c0.csv, c2.csv, q.csv and summary.json into ``output_dir``.

    Values carry 17 significant digits so the delimited files round-trip
    bit-for-bit; the JSON summary mirrors the report's field names.
    Returns the written paths.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ns = report.n_schedule
    paths = []
    path = out / "c0.csv"
    _write_csv(path, ["N", "c0_err"], list(zip(ns, report.c0_err)))
    paths.append(path)
    path = out / "c2.csv"
    _write_csv(path, ["N", "c2_err_rho", "c2_err_tt", "c2_err_mixed"],
               list(zip(ns, report.c2_err_rho, report.c2_err_tt, report.c2_err_mixed)))
    paths.append(path)
    path = out / "q.csv"
    _write_csv(path, ["N", "q_err", "boundary_q_err"],
               list(zip(ns, report.q_err, report.boundary_q_err)))
    paths.append(path)
    summary = {f.name: getattr(report, f.name) for f in fields(report)}
    for key, value in list(summary.items()):
        if isinstance(value, tuple):
            summary[key] = list(value)
    path = out / "summary.json"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    paths.append(path)
    return paths


def read_report_csvs(output_dir) -> dict[str, list[list[float]]]:
    """Parse the emitted CSV trio back into float rows (round-trip check)."""
    out = Path(output_dir)
    parsed = {}
    for name in ("c0.csv", "c2.csv", "q.csv"):
        lines = (out / name).read_text(encoding="utf-8").splitlines()
        parsed[name] = [[float(cell) for cell in line.split(",")]
                        for line in lines[1:]]
    return parsed
