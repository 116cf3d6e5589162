"""Norming tables for the monomial sections at degree N.

For a metric with symplectic potential G and degree N, the norming constant
at lattice point alpha = k/N is Q^N(alpha) = 2 pi * integral of
exp(-N F_alpha) over [0, 1]; the un-normalized variant is
Qcal^N(alpha) = exp(N G(alpha)) * Q^N(alpha).  The canonical metric has the
exact closed form Qcal_P^N(k/N) = 2 pi * B(k+1, N-k+1), which serves both
as the reference for the ratio q = Q / Q_P and as the exactness oracle for
the quadrature route.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .potentials import (GeodesicFamily, MetricPotential, canonical_potential,
                         geodesic_metric)
from .quadrature import log_laplace

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NormingTable:
    """Log norming constants of one metric at one degree.

    ``log_Qcal[k]`` and ``log_Q[k]`` satisfy
    log_Qcal[k] - log_Q[k] = N * G(k/N) by construction.
    Arrays are never mutated after construction.
    """

    n: int
    metric_id: str
    log_Qcal: np.ndarray
    log_Q: np.ndarray

    @property
    def alphas(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


def canonical_reference(n: int, k: int) -> float:
    """Exact log Qcal_P^N(k/N) = log 2pi + log B(k+1, N-k+1) via log-gamma."""
    if not 0 <= k <= n:
        raise ValueError(f"lattice index k = {k} outside 0..{n}")
    return _LOG_2PI + float(gammaln(k + 1) + gammaln(n - k + 1) - gammaln(n + 2))


def canonical_log_q(n: int) -> np.ndarray:
    """Exact canonical log Q^N on the whole lattice (closed form, no quadrature)."""
    k = np.arange(n + 1)
    log_qcal = _LOG_2PI + gammaln(k + 1) + gammaln(n - k + 1) - gammaln(n + 2)
    return log_qcal - n * canonical_potential(k / n)


def canonical_table(n: int) -> NormingTable:
    """The canonical norming table from the Beta closed form."""
    k = np.arange(n + 1)
    log_qcal = _LOG_2PI + gammaln(k + 1) + gammaln(n - k + 1) - gammaln(n + 2)
    return NormingTable(
        n=n,
        metric_id="canonical",
        log_Qcal=np.asarray(log_qcal, dtype=float),
        log_Q=np.asarray(canonical_log_q(n), dtype=float),
    )


def build_norming_table(m: MetricPotential, n: int, tail_rtol: float = 1e-14,
                        executor: Executor | None = None,
                        chunk: int = 64) -> NormingTable:
    """Quadrature-backed norming table of metric m at degree n.

    Each lattice point is an independent certified window quadrature;
    with an executor the lattice is split into contiguous chunks whose
    results are reassembled in index order, so the table is identical
    regardless of worker count.
    """
    if n < 1 or n != int(n):
        raise ValueError(f"degree must be a positive integer, got {n}")
    n = int(n)
    ks = np.arange(n + 1)

    def block(lo: int, hi: int) -> np.ndarray:
        return np.array([log_laplace(m, n, k / n, tail_rtol=tail_rtol)
                         for k in range(lo, hi)])

    if executor is None:
        log_integral = block(0, n + 1)
    else:
        bounds = [(lo, min(lo + chunk, n + 1)) for lo in range(0, n + 1, chunk)]
        parts = list(executor.map(lambda b: block(*b), bounds))
        log_integral = np.concatenate(parts)
    log_q = _LOG_2PI + log_integral
    log_qcal = log_q + n * np.asarray(m.value(ks / n), dtype=float)
    return NormingTable(n=n, metric_id=m.metric_id,
                        log_Qcal=np.asarray(log_qcal, dtype=float),
                        log_Q=np.asarray(log_q, dtype=float))


class TableCache:
    """Lazily built norming tables keyed by (metric_id, degree).

    Thread-safe: a lock guards the dict; a race at worst recomputes a
    table whose entries are deterministic, so cached values never depend
    on scheduling.
    """

    def __init__(self, tail_rtol: float = 1e-14):
        self.tail_rtol = tail_rtol
        self._tables: dict[tuple[str, int], NormingTable] = {}
        self._lock = threading.Lock()

    def table(self, m: MetricPotential, n: int,
              executor: Executor | None = None) -> NormingTable:
        key = (m.metric_id, n)
        with self._lock:
            hit = self._tables.get(key)
        if hit is not None:
            return hit
        built = build_norming_table(m, n, tail_rtol=self.tail_rtol,
                                    executor=executor)
        with self._lock:
            return self._tables.setdefault(key, built)

    def family_table(self, family: GeodesicFamily, t: float, n: int,
                     executor: Executor | None = None) -> NormingTable:
        return self.table(geodesic_metric(family, t), n, executor=executor)


def q_ratio(table: NormingTable, k: int) -> float:
    """q^N(k/N) = Q^N / Q_P^N with the exact canonical denominator."""
    n = table.n
    if not 0 <= k <= n:
        raise ValueError(f"lattice index k = {k} outside 0..{n}")
    log_qp = canonical_reference(n, k) - n * float(canonical_potential(k / n))
    return math.exp(float(table.log_Q[k]) - log_qp)


def q_ratios(table: NormingTable) -> np.ndarray:
    """Vector of q^N over the whole lattice."""
    return np.exp(table.log_Q - canonical_log_q(table.n))


def omega(m: MetricPotential, alpha: float) -> float:
    """Theoretical limit sqrt(G_P''(alpha) / G''(alpha)) of the q ratio.

    Extends continuously by 1 at the endpoints of [0, 1].
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0 or alpha == 1.0:
        return 1.0
    return 1.0 / math.sqrt(1.0 + alpha * (1.0 - alpha) * float(m.f_d2(alpha)))


def omega_vector(m: MetricPotential, alphas: np.ndarray) -> np.ndarray:
    """omega on an array of lattice points, endpoint extension included."""
    alphas = np.asarray(alphas, dtype=float)
    out = np.ones_like(alphas)
    interior = (alphas > 0.0) & (alphas < 1.0)
    a = alphas[interior]
    out[interior] = 1.0 / np.sqrt(1.0 + a * (1.0 - a) * m.f_d2(a))
    return out


class ConsistencyError(RuntimeError):
    """Two algebraically identical evaluation routes disagreed."""


def r_ratio(table_t: NormingTable, table_0: NormingTable, table_1: NormingTable,
            t: float, identity_tol: float = 1e-8) -> np.ndarray:
    """Geodesic ratio R_t^N(k/N) = Q_t / (Q_0^(1-t) Q_1^t) over the lattice.

    Computed through log Q and independently through log Qcal (where the
    N G contributions cancel because G_t is the exact linear blend); the
    two routes must agree within ``identity_tol`` relative, otherwise a
    ConsistencyError reports the worst lattice point.
    """
    if not (table_t.n == table_0.n == table_1.n):
        raise ValueError("tables must share the degree")
    via_q = table_t.log_Q - (1.0 - t) * table_0.log_Q - t * table_1.log_Q
    via_qcal = table_t.log_Qcal - (1.0 - t) * table_0.log_Qcal - t * table_1.log_Qcal
    gap = np.abs(via_q - via_qcal)
    worst = int(np.argmax(gap))
    if gap[worst] > identity_tol:
        raise ConsistencyError(
            f"R ratio routes disagree by {gap[worst]:.3g} (> {identity_tol:.3g}) "
            f"at k = {worst}, N = {table_t.n}, t = {t}"
        )
    return np.exp(via_q)


def stirling_reference(n: int, k: int) -> float:
    """Stirling approximation of log C(N, k) for interior lattice points.

    log C(N, Na) ~ -0.5 log(2 pi N a(1-a)) - N G_P(a) with a = k/N.
    Only valid for min(k, N-k) >= N^(1/4); outside that regime a
    ValueError is raised.  This is a diagnostic cross-check, not used in
    any table construction.
    """
    if min(k, n - k) < float(n) ** 0.25:
        raise ValueError(
            f"k = {k} is outside the interior regime for N = {n} "
            f"(requires min(k, N-k) >= N^(1/4))"
        )
    a = k / n
    return (-0.5 * math.log(2.0 * math.pi * n * a * (1.0 - a))
            - n * float(canonical_potential(a)))


def write_table_csv(table: NormingTable, path) -> None:
    """Write a norming table as CSV: metadata line, header, then one row
    per lattice point with columns k, alpha, log_Qcal, log_Q, q."""
    q = q_ratios(table)
    alphas = table.alphas
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# metric={table.metric_id} N={table.n}\n")
        fh.write("k,alpha,log_Qcal,log_Q,q\n")
        for k in range(table.n + 1):
            fh.write(f"{k},{alphas[k]:.17g},{table.log_Qcal[k]:.17g},"
                     f"{table.log_Q[k]:.17g},{q[k]:.17g}\n")
