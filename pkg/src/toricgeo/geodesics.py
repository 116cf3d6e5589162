"""Bergman approximants of the geodesic potential and their derivatives.

At degree N the geodesic of Hermitian norms interpolates the endpoint
norming data geometrically, and the associated potential is the scaled
log-sum-exp

    u_N(t, rho) = (1/N) log sum_k exp(k rho - (1-t) log Qcal_0[k]
                                              - t log Qcal_1[k]).

Its derivatives in t and rho are moments of the softmax weights, the
distance-to-limit function is E_N = exp(N (u_N - U_t)), and the Szego-type
density Pi_N ties the table to the partition of unity.  Everything here is
a finite, explicitly ordered sum, so results are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .norming import ConsistencyError, NormingTable, TableCache, r_ratio
from .potentials import GeodesicFamily, geodesic_metric, legendre_dual

__all__ = [
    "BergmanFreeEnergy",
    "SoftmaxMoments",
    "free_energy",
    "moments",
    "e_function",
    "szego",
    "write_geodesic_csv",
]


@dataclass(frozen=True)
class BergmanFreeEnergy:
    """Endpoint norming data of a degree-N Bergman geodesic.

    ``d[k] = log_Qcal1[k] - log_Qcal0[k]`` is the per-section log ratio
    whose softmax statistics give the time derivatives.
    """

    n: int
    log_Qcal0: np.ndarray
    log_Qcal1: np.ndarray
    d: np.ndarray

    @classmethod
    def from_tables(cls, table0: NormingTable, table1: NormingTable) -> "BergmanFreeEnergy":
        if table0.n != table1.n:
            raise ValueError(
                f"endpoint tables disagree on degree: {table0.n} vs {table1.n}")
        return cls(n=table0.n,
                   log_Qcal0=table0.log_Qcal,
                   log_Qcal1=table1.log_Qcal,
                   d=table1.log_Qcal - table0.log_Qcal)


def _exponents(fe: BergmanFreeEnergy, t: float, rho: float) -> np.ndarray:
    k = np.arange(fe.n + 1, dtype=float)
    return k * rho - (1.0 - t) * fe.log_Qcal0 - t * fe.log_Qcal1


def free_energy(fe: BergmanFreeEnergy, t: float, rho: float) -> float:
    """u_N(t, rho), the Bergman geodesic potential at degree N.

    Max-shifted log-sum-exp in fixed index order; the geodesic potential
    relative to the t = 0 endpoint is u_N - U_0.
    """
    e = _exponents(fe, t, rho)
    peak = float(np.max(e))
    return (peak + math.log(float(np.sum(np.exp(e - peak))))) / fe.n


@dataclass(frozen=True)
class SoftmaxMoments:
    """Softmax statistics of the Bergman sections at one (t, rho).

    The derivative contract:
      d/drho   u_N = mean_alpha
      d2/drho2 u_N = n * var_alpha
      d/dt     u_N = -mean_d / n
      d2/dt2   u_N = var_d / n
      d2/dtdrho u_N = -cov_alpha_d
    """

    n: int
    weights: np.ndarray
    mean_alpha: float
    var_alpha: float
    mean_d: float
    var_d: float
    cov_alpha_d: float

    @property
    def d_rho(self) -> float:
        return self.mean_alpha

    @property
    def d2_rho(self) -> float:
        return self.n * self.var_alpha

    @property
    def d_t(self) -> float:
        return -self.mean_d / self.n

    @property
    def d2_t(self) -> float:
        return self.var_d / self.n

    @property
    def d2_t_rho(self) -> float:
        return -self.cov_alpha_d


def moments(fe: BergmanFreeEnergy, t: float, rho: float) -> SoftmaxMoments:
    """Softmax weights p[k] and the centered moments driving u_N's derivatives."""
    e = _exponents(fe, t, rho)
    e = e - float(np.max(e))
    w = np.exp(e)
    p = w / float(np.sum(w))
    alpha = np.arange(fe.n + 1, dtype=float) / fe.n
    mean_alpha = float(np.sum(p * alpha))
    mean_d = float(np.sum(p * fe.d))
    ca = alpha - mean_alpha
    cd = fe.d - mean_d
    return SoftmaxMoments(
        n=fe.n,
        weights=p,
        mean_alpha=mean_alpha,
        var_alpha=float(np.sum(p * ca * ca)),
        mean_d=mean_d,
        var_d=float(np.sum(p * cd * cd)),
        cov_alpha_d=float(np.sum(p * ca * cd)),
    )


def e_function(family: GeodesicFamily, fe: BergmanFreeEnergy, t: float,
               rho: float, *, cache: TableCache | None = None,
               verify: bool = False, identity_tol: float = 1e-8,
               root_tol: float = 1e-12) -> float:
    """log E_N(t, rho) = N (u_N(t, rho) - U_t(rho)).

    With ``verify`` the value is recomputed through the ratio route
    sum_k R_t^N(k/N) P_k with P_k = exp(k rho - N U_t - log Qcal_t[k]);
    the two routes must agree within ``identity_tol`` relative, otherwise
    a ConsistencyError carries the offending (N, t, rho).
    """
    u = free_energy(fe, t, rho)
    point = legendre_dual(geodesic_metric(family, t), rho, tol=root_tol)
    direct = fe.n * (u - point.U)
    if verify:
        if cache is None:
            cache = TableCache()
        table_t = cache.family_table(family, t, fe.n)
        table_0 = cache.family_table(family, 0.0, fe.n)
        table_1 = cache.family_table(family, 1.0, fe.n)
        log_r = np.log(r_ratio(table_t, table_0, table_1, t,
                               identity_tol=identity_tol))
        k = np.arange(fe.n + 1, dtype=float)
        e = log_r + k * rho - fe.n * point.U - table_t.log_Qcal
        peak = float(np.max(e))
        ratio_route = peak + math.log(float(np.sum(np.exp(e - peak))))
        if abs(ratio_route - direct) > identity_tol:
            raise ConsistencyError(
                f"E_N routes disagree by {abs(ratio_route - direct):.3g} "
                f"(> {identity_tol:.3g}) at N = {fe.n}, t = {t}, rho = {rho}"
            )
    return direct


def szego(family: GeodesicFamily, table_t: NormingTable, t: float, rho: float,
          root_tol: float = 1e-12) -> float:
    """log Pi_N(t, rho), the log of the Szego-type density on the diagonal.

    Pi_N = sum_k exp(N (alpha rho - U_t(rho)) - log Qcal_t[k]) with
    alpha = k/N.  For the canonical metric Pi_N = (N+1)/(2 pi) identically.
    """
    point = legendre_dual(geodesic_metric(family, t), rho, tol=root_tol)
    k = np.arange(table_t.n + 1, dtype=float)
    e = k * rho - table_t.n * point.U - table_t.log_Qcal
    peak = float(np.max(e))
    return peak + math.log(float(np.sum(np.exp(e - peak))))


def write_geodesic_csv(path, family: GeodesicFamily, fe: BergmanFreeEnergy,
                       t_grid, rho_grid, cache: TableCache | None = None,
                       verify: bool = True, identity_tol: float = 1e-8,
                       root_tol: float = 1e-12) -> None:
    """Dump the per-(t, rho) geodesic evaluation table as CSV.

    Columns: t, rho, u_N, phi_N, d_rho, d2_rho, d_t, d2_t, d2_t_rho,
    log_E, log_Pi.  phi_N is u_N minus the exact potential U_0 of the
    t = 0 endpoint.
    """
    if cache is None:
        cache = TableCache()
    rows = []
    for t in t_grid:
        table_t = cache.family_table(family, t, fe.n)
        for rho in rho_grid:
            u = free_energy(fe, t, rho)
            u0 = legendre_dual(family.m0, rho, tol=root_tol).U
            mom = moments(fe, t, rho)
            log_e = e_function(family, fe, t, rho, cache=cache, verify=verify,
                               identity_tol=identity_tol, root_tol=root_tol)
            log_pi = szego(family, table_t, t, rho, root_tol=root_tol)
            rows.append((t, rho, u, u - u0, mom.d_rho, mom.d2_rho, mom.d_t,
                         mom.d2_t, mom.d2_t_rho, log_e, log_pi))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,rho,u_N,phi_N,d_rho,d2_rho,d_t,d2_t,d2_t_rho,log_E,log_Pi\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
