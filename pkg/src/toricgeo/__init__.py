"""Monge-Ampere geodesics of torus-invariant metrics on the projective line
and their finite-degree Bergman approximants."""

from .geodesics import (BergmanFreeEnergy, SoftmaxMoments, e_function,
                        free_energy, moments, szego, write_geodesic_csv)
from .lab import (INTERIOR_WINDOW, ConfigError, ConvergenceReport,
                  ExperimentConfig, RateFit, emit_report, fit_rate,
                  parse_config, read_report_csvs, run_convergence)
from .norming import (ConsistencyError, NormingTable, TableCache,
                      build_norming_table, canonical_log_q, canonical_reference,
                      canonical_table, omega, omega_vector, q_ratio, q_ratios,
                      r_ratio, stirling_reference, write_table_csv)
from .potentials import (DerivativeBundle, DualPoint, GeodesicFamily,
                         MetricPotential, RootError, ValidationError,
                         canonical_grad, canonical_hess, canonical_potential,
                         geodesic_metric, legendre_dual, ma_derivatives,
                         make_family, make_metric, velocity)
from .quadrature import PhaseEval, laplace_leading, log_laplace, phase

__version__ = "0.1.0"

_SUBMODULES = {"cli", "figures", "geodesics", "lab", "norming", "potentials",
               "quadrature"}
__all__ = [name for name in dir()
           if not name.startswith("_") and name not in _SUBMODULES]
