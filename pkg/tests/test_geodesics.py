"""Bergman free energy, softmax moments, distance function and Szego density."""

import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly

from toricgeo import (BergmanFreeEnergy, ConsistencyError, TableCache,
                      canonical_table, e_function, free_energy,
                      geodesic_metric, legendre_dual, ma_derivatives,
                      make_family, make_metric, moments, szego,
                      write_geodesic_csv)

F0 = (0.0, 0.0, 0.25)
F1 = (0.0, 0.0, -0.15, 0.3)
_LOG_2PI = math.log(2.0 * math.pi)


def _canonical_fe(n: int) -> BergmanFreeEnergy:
    table = canonical_table(n)
    return BergmanFreeEnergy.from_tables(table, table)


def _family_fe(cache: TableCache, n: int):
    family = make_family(make_metric(F0), make_metric(F1))
    fe = BergmanFreeEnergy.from_tables(
        cache.family_table(family, 0.0, n),
        cache.family_table(family, 1.0, n))
    return family, fe


def test_canonical_identity_all_degrees():
    # For the canonical metric u_N = log(1 + e^rho) + log((N+1)/(2 pi)) / N
    # exactly, at every t.
    for n in (1, 16, 100):
        fe = _canonical_fe(n)
        shift = math.log((n + 1) / (2.0 * math.pi)) / n
        for t in (0.0, 0.37, 1.0):
            for rho in (-6.0, -1.0, 0.0, 2.5, 7.0):
                expected = float(np.logaddexp(0.0, rho)) + shift
                assert free_energy(fe, t, rho) == pytest.approx(expected,
                                                                rel=1e-12)
    # Degree one in closed form: u_1 = log((1 + e^rho) / pi).
    fe1 = _canonical_fe(1)
    assert free_energy(fe1, 0.5, 0.8) == pytest.approx(
        math.log((1.0 + math.exp(0.8)) / math.pi), rel=1e-13)


def test_from_tables_rejects_degree_mismatch():
    with pytest.raises(ValueError):
        BergmanFreeEnergy.from_tables(canonical_table(8), canonical_table(16))


def test_free_energy_extreme_rho_is_finite():
    cache = TableCache()
    _, fe = _family_fe(cache, 32)
    u_plus = free_energy(fe, 0.5, 600.0)
    assert math.isfinite(u_plus)
    exponent = 600.0 - 0.5 * (fe.log_Qcal0[32] + fe.log_Qcal1[32]) / 32.0
    assert u_plus == pytest.approx(exponent, rel=1e-13)
    u_minus = free_energy(fe, 0.5, -600.0)
    assert u_minus == pytest.approx(-0.5 * (fe.log_Qcal0[0] + fe.log_Qcal1[0]) / 32.0,
                                    rel=1e-13)


def test_moments_invariants():
    cache = TableCache()
    _, fe = _family_fe(cache, 64)
    previous_mean = -1.0
    for rho in (-4.0, -1.0, 0.5, 2.0, 5.0):
        mom = moments(fe, 0.4, rho)
        assert float(np.sum(mom.weights)) == pytest.approx(1.0, abs=1e-12)
        assert float(np.min(mom.weights)) >= 0.0
        assert 0.0 < mom.mean_alpha < 1.0
        assert mom.var_alpha >= 0.0 and mom.var_d >= 0.0
        bound = math.sqrt(mom.var_alpha * mom.var_d)
        assert abs(mom.cov_alpha_d) <= bound * (1.0 + 1e-12) + 1e-300
        assert mom.mean_alpha > previous_mean
        previous_mean = mom.mean_alpha
        # Derivative accessors are fixed linear images of the moments.
        assert mom.d_rho == mom.mean_alpha
        assert mom.d2_rho == 64 * mom.var_alpha
        assert mom.d_t == -mom.mean_d / 64
        assert mom.d2_t == mom.var_d / 64
        assert mom.d2_t_rho == -mom.cov_alpha_d


def test_moments_match_high_precision_fd(moments_fd_worst):
    worst, where = moments_fd_worst
    assert worst <= 1e-6, f"worst relative FD gap {worst:.3e} at (t, rho) = {where}"


def test_softmax_weights_localize(default_config, shared_cache):
    family = default_config.family()
    n = 1024
    fe = BergmanFreeEnergy.from_tables(
        shared_cache.family_table(family, 0.0, n),
        shared_cache.family_table(family, 1.0, n))
    alphas = np.arange(n + 1) / n
    for rho in (-2.0, 1.0, 3.0):
        x = ma_derivatives(family, 0.5, rho).x
        mom = moments(fe, 0.5, rho)
        outside = float(np.sum(mom.weights[np.abs(alphas - x) > 0.1]))
        assert outside <= 1e-6


def test_e_function_canonical_pin():
    flat = make_metric(())
    family = make_family(flat, flat)
    n = 64
    fe = _canonical_fe(n)
    expected = math.log((n + 1) / (2.0 * math.pi))
    for t, rho in ((0.0, -3.0), (0.5, 0.0), (1.0, 4.2)):
        assert e_function(family, fe, t, rho) == pytest.approx(expected,
                                                               rel=1e-10)


def test_e_function_verified_route_agrees(shared_cache, default_config):
    family = default_config.family()
    fe = BergmanFreeEnergy.from_tables(
        shared_cache.family_table(family, 0.0, 64),
        shared_cache.family_table(family, 1.0, 64))
    direct = e_function(family, fe, 0.5, 1.3)
    verified = e_function(family, fe, 0.5, 1.3, cache=shared_cache, verify=True)
    assert verified == direct


def test_e_function_route_mismatch_raises(shared_cache, default_config):
    family = default_config.family()
    t0 = shared_cache.family_table(family, 0.0, 64)
    t1 = shared_cache.family_table(family, 1.0, 64)
    corrupted = BergmanFreeEnergy(n=64, log_Qcal0=t0.log_Qcal + 0.05,
                                  log_Qcal1=t1.log_Qcal + 0.05,
                                  d=t1.log_Qcal - t0.log_Qcal)
    with pytest.raises(ConsistencyError, match="disagree"):
        e_function(family, corrupted, 0.4, 0.7, cache=shared_cache, verify=True)


def test_szego_canonical_density():
    flat = make_metric(())
    family = make_family(flat, flat)
    for n in (1, 100):
        table = canonical_table(n)
        expected = math.log((n + 1) / (2.0 * math.pi))
        for rho in (-3.0, 0.0, 2.0):
            assert szego(family, table, 0.0, rho) == pytest.approx(expected,
                                                                   rel=1e-12)


def test_szego_dominates_peak_term(shared_cache, default_config):
    family = default_config.family()
    n = 64
    table = shared_cache.family_table(family, 0.5, n)
    for rho in (-4.0, 0.5, 3.0):
        value = szego(family, table, 0.5, rho)
        point = legendre_dual(geodesic_metric(family, 0.5), rho)
        exponents = np.arange(n + 1) * rho - n * point.U - table.log_Qcal
        assert value >= float(np.max(exponents))


def test_szego_equals_distance_function_at_start(shared_cache, default_config):
    # At t = 0 the ratio weights are identically 1, so log E_N = log Pi_N.
    family = default_config.family()
    n = 64
    table0 = shared_cache.family_table(family, 0.0, n)
    fe = BergmanFreeEnergy.from_tables(
        table0, shared_cache.family_table(family, 1.0, n))
    for rho in (-4.0, 0.5, 3.0):
        assert e_function(family, fe, 0.0, rho) == pytest.approx(
            szego(family, table0, 0.0, rho), abs=1e-10)


def _mirror(coeffs):
    """Coefficients of f(1 - x) for polynomial coefficients of f."""
    out = np.zeros(max(len(coeffs), 1))
    for i, c in enumerate(coeffs):
        out = npoly.polyadd(out, c * npoly.polypow((1.0, -1.0), i))
    return tuple(float(v) for v in out)


def test_reflection_symmetry():
    # Mirrored metrics satisfy u~(t, -rho) = u(t, rho) - rho: the monomial
    # basis reverses and the norming tables read backwards.
    cache = TableCache()
    n = 32
    family, fe = _family_fe(cache, n)
    mirrored = make_family(make_metric(_mirror(F0)), make_metric(_mirror(F1)))
    fe_m = BergmanFreeEnergy.from_tables(
        cache.family_table(mirrored, 0.0, n),
        cache.family_table(mirrored, 1.0, n))
    for t in (0.0, 0.5, 1.0):
        for rho in (-5.0, -0.7, 0.0, 2.2, 6.0):
            assert free_energy(fe_m, t, -rho) == pytest.approx(
                free_energy(fe, t, rho) - rho, abs=1e-10)


def test_write_geodesic_csv_round_trips(tmp_path, shared_cache, default_config):
    family = default_config.family()
    n = 8
    fe = BergmanFreeEnergy.from_tables(
        shared_cache.family_table(family, 0.0, n),
        shared_cache.family_table(family, 1.0, n))
    t_grid = (0.0, 0.5, 1.0)
    rho_grid = (-2.0, 0.0, 2.0)
    path = tmp_path / "geodesic.csv"
    write_geodesic_csv(path, family, fe, t_grid, rho_grid, cache=shared_cache)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,rho,u_N,phi_N,d_rho,d2_rho,d_t,d2_t,d2_t_rho,log_E,log_Pi"
    assert len(lines) == 1 + len(t_grid) * len(rho_grid)
    row = [float(v) for v in lines[1 + 3 + 1].split(",")]  # t = 0.5, rho = 0
    assert row[0] == 0.5 and row[1] == 0.0
    assert row[2] == free_energy(fe, 0.5, 0.0)
    assert row[3] == pytest.approx(row[2] - legendre_dual(family.m0, 0.0).U,
                                   rel=1e-14)
    mom = moments(fe, 0.5, 0.0)
    assert row[4] == mom.d_rho and row[5] == mom.d2_rho
    assert all(math.isfinite(v) for v in row)
