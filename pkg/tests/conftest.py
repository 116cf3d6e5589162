"""Shared fixtures: session table cache, the default-configuration sweep,
large-degree norming tables, and the high-precision derivative oracles.

The acceptance tests append one PASS/FAIL line per criterion to
CRITERION_LINES; the terminal summary hook echoes them at the end of the
run so they are visible even with output capture enabled.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import mp_oracles
from toricgeo import (BergmanFreeEnergy, ExperimentConfig, TableCache,
                      ma_derivatives, moments, run_convergence)

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_config() -> ExperimentConfig:
    return ExperimentConfig()


@pytest.fixture(scope="session")
def shared_cache() -> TableCache:
    return TableCache()


@pytest.fixture(scope="session")
def default_report(default_config, shared_cache):
    """The full default convergence sweep, shared across test modules."""
    return run_convergence(default_config, threads=0, cache=shared_cache)


@pytest.fixture(scope="session")
def big_tables(default_config, shared_cache):
    """Geodesic-family tables at t in {0, 1/2, 1} for degrees up to 4096."""
    family = default_config.family()
    out = {}
    with ThreadPoolExecutor(max_workers=8) as pool:
        for n in (64, 256, 1024, 4096):
            for t in (0.0, 0.5, 1.0):
                out[(t, n)] = shared_cache.family_table(family, t, n,
                                                        executor=pool)
    return out


@pytest.fixture(scope="session")
def potential_fd_worst(default_config):
    """Worst relative gap of the analytic dual-potential derivatives against
    60-digit central differences on a 10 x 10 (t, rho) grid."""
    family = default_config.family()
    c0, c1 = default_config.f0_coeffs, default_config.f1_coeffs
    worst, where = 0.0, None
    for t in np.linspace(0.05, 0.95, 10):
        for rho in np.linspace(-6.0, 6.0, 10):
            bundle = ma_derivatives(family, float(t), float(rho))
            fd = mp_oracles.fd_grid(
                lambda tt, rr: mp_oracles.dual_potential(c0, c1, tt, rr),
                float(t), float(rho))
            analytic = (bundle.dU_drho, bundle.d2U_drho2, bundle.dU_dt,
                        bundle.d2U_dt2, bundle.d2U_dtdrho)
            for a, o in zip(analytic, fd):
                gap = mp_oracles.rel_gap(a, o)
                if gap > worst:
                    worst, where = gap, (float(t), float(rho))
    return worst, where


@pytest.fixture(scope="session")
def moments_fd_worst(default_config, shared_cache):
    """Worst relative gap of the softmax-moment derivatives of u_N against
    60-digit central differences at degree 64."""
    family = default_config.family()
    n = 64
    fe = BergmanFreeEnergy.from_tables(
        shared_cache.family_table(family, 0.0, n),
        shared_cache.family_table(family, 1.0, n))
    worst, where = 0.0, None
    for t in np.linspace(0.1, 0.9, 6):
        for rho in np.linspace(-5.0, 5.0, 6):
            mom = moments(fe, float(t), float(rho))
            fd = mp_oracles.fd_grid(
                lambda tt, rr: mp_oracles.free_energy_mp(
                    fe.log_Qcal0, fe.log_Qcal1, n, tt, rr),
                float(t), float(rho))
            analytic = (mom.d_rho, mom.d2_rho, mom.d_t, mom.d2_t,
                        mom.d2_t_rho)
            for a, o in zip(analytic, fd):
                gap = mp_oracles.rel_gap(a, o)
                if gap > worst:
                    worst, where = gap, (float(t), float(rho))
    return worst, where
