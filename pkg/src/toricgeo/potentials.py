"""Symplectic potentials on the unit interval and their Legendre duals.

A torus-invariant metric is described by a symplectic potential
G(x) = G_P(x) + f(x) on [0, 1], where G_P(x) = x log x + (1-x) log(1-x)
is the canonical (Fubini-Study) part and f is a polynomial perturbation.
The metric is admissible when x(1-x) G''(x) is bounded below by a positive
margin.  The Legendre dual U(rho) = sup_x (x rho - G(x)) is the Kaehler
potential in the log coordinate rho, and linear interpolation of symplectic
potentials is the geodesic of the associated Monge-Ampere equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import expit, xlogy


class ValidationError(ValueError):
    """A candidate potential fails the convexity requirement.

    Attributes
    ----------
    x : float
        A point of [0, 1] at which x(1-x) G''(x) is non-positive.
    """

    def __init__(self, message: str, x: float):
        super().__init__(message)
        self.x = x


class RootError(RuntimeError):
    """The dual root solve did not converge within the iteration cap."""


def canonical_potential(x):
    """G_P(x) = x log x + (1-x) log(1-x), with 0 log 0 = 0 at the endpoints."""
    x = np.asarray(x, dtype=float)
    out = xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)
    return out if out.shape else float(out)


def canonical_grad(x):
    """G_P'(x) = log(x / (1-x)) on the open interval."""
    x = np.asarray(x, dtype=float)
    out = np.log(x) - np.log1p(-x)
    return out if out.shape else float(out)


def canonical_hess(x):
    """G_P''(x) = 1 / (x (1-x)) on the open interval."""
    x = np.asarray(x, dtype=float)
    out = 1.0 / (x * (1.0 - x))
    return out if out.shape else float(out)


def _poly_min_on_unit_interval(coeffs: np.ndarray) -> tuple[float, float]:
    """Exact minimum of a polynomial over [0, 1].

    Returns (min value, argmin).  Candidates are the endpoints and the real
    critical points inside the interval, so the result is exact up to
    float evaluation error.
    """
    candidates = [0.0, 1.0]
    deriv = npoly.polyder(coeffs)
    if deriv.size > 1 or deriv[0] != 0.0:
        for root in npoly.polyroots(deriv):
            if abs(root.imag) < 1e-9 and -1e-12 < root.real < 1.0 + 1e-12:
                candidates.append(float(min(max(root.real, 0.0), 1.0)))
    values = npoly.polyval(np.asarray(candidates), coeffs)
    best = int(np.argmin(values))
    return float(values[best]), candidates[best]


@dataclass(frozen=True)
class MetricPotential:
    """An admissible symplectic potential G = G_P + f with a certified margin.

    ``f_coeffs`` lists the polynomial coefficients of f with the constant
    term first.  ``convexity_margin`` is a certified positive lower bound for
    x(1-x) G''(x) on [0, 1]; ``grid_resolution`` records how many sample
    points backed the certificate.  Instances are immutable and safe to share
    across threads.
    """

    f_coeffs: tuple[float, ...]
    convexity_margin: float
    grid_resolution: int
    _d1: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _d2: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = np.asarray(self.f_coeffs if self.f_coeffs else (0.0,), dtype=float)
        object.__setattr__(self, "_d1", tuple(npoly.polyder(coeffs)) or (0.0,))
        object.__setattr__(self, "_d2", tuple(npoly.polyder(coeffs, 2)) or (0.0,))

    @property
    def metric_id(self) -> str:
        """Deterministic identifier used for cache keys and CSV headers."""
        return "poly:" + ",".join(repr(float(c)) for c in self.f_coeffs)

    def f(self, x):
        return npoly.polyval(x, np.asarray(self.f_coeffs if self.f_coeffs else (0.0,)))

    def f_d1(self, x):
        return npoly.polyval(x, np.asarray(self._d1))

    def f_d2(self, x):
        return npoly.polyval(x, np.asarray(self._d2))

    def value(self, x):
        """G(x) = G_P(x) + f(x)."""
        return canonical_potential(x) + self.f(x)

    def grad(self, x):
        """G'(x) = log(x/(1-x)) + f'(x)."""
        return canonical_grad(x) + self.f_d1(x)

    def hess(self, x):
        """G''(x) = 1/(x(1-x)) + f''(x)."""
        return canonical_hess(x) + self.f_d2(x)

    def slope_bound(self) -> float:
        """Upper bound for |f'| on [0, 1] (coefficient-sum bound)."""
        return float(np.sum(np.abs(self._d1)))


def make_metric(f_coeffs, grid_resolution: int = 2001) -> MetricPotential:
    """Validate a polynomial perturbation and certify its convexity margin.

    The margin is the minimum of h(x) = 1 + x(1-x) f''(x) over [0, 1],
    obtained exactly from the critical points of the polynomial h together
    with the endpoints, and cross-checked on a uniform grid of
    ``grid_resolution`` points.  Raises ValidationError (carrying a violating
    x) when the margin is not strictly positive.
    """
    if grid_resolution < 1000:
        raise ValueError(f"grid_resolution must be >= 1000, got {grid_resolution}")
    coeffs = tuple(float(c) for c in f_coeffs)
    base = np.asarray(coeffs if coeffs else (0.0,), dtype=float)
    d2 = npoly.polyder(base, 2)
    if d2.size == 0:
        d2 = np.zeros(1)
    # h(x) = 1 + x(1-x) f''(x) as polynomial coefficients.
    h = npoly.polyadd((1.0,), npoly.polymul((0.0, 1.0, -1.0), d2))
    exact_min, exact_arg = _poly_min_on_unit_interval(np.asarray(h))
    grid = np.linspace(0.0, 1.0, grid_resolution)
    grid_values = npoly.polyval(grid, np.asarray(h))
    grid_idx = int(np.argmin(grid_values))
    margin = min(exact_min, float(grid_values[grid_idx]))
    arg = exact_arg if exact_min <= grid_values[grid_idx] else float(grid[grid_idx])
    if margin <= 0.0:
        raise ValidationError(
            f"potential is not uniformly convex: x(1-x)G''(x) = {margin:.6g} at x = {arg:.6g}",
            x=arg,
        )
    return MetricPotential(coeffs, margin, grid_resolution)


@dataclass(frozen=True)
class GeodesicFamily:
    """Endpoints of a linear geodesic of symplectic potentials.

    G_t = (1-t) G_0 + t G_1 for t in [0, 1]; the geodesic velocity is
    v(x) = f_1(x) - f_0(x).
    """

    m0: MetricPotential
    m1: MetricPotential
    _v1: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c0 = np.asarray(self.m0.f_coeffs if self.m0.f_coeffs else (0.0,))
        c1 = np.asarray(self.m1.f_coeffs if self.m1.f_coeffs else (0.0,))
        v = npoly.polysub(c1, c0)
        object.__setattr__(self, "_v1", tuple(npoly.polyder(v)) or (0.0,))

    def velocity_d1(self, x):
        """v'(x) = f_1'(x) - f_0'(x)."""
        return npoly.polyval(x, np.asarray(self._v1))


def make_family(m0: MetricPotential, m1: MetricPotential) -> GeodesicFamily:
    """Pair two admissible metrics into a geodesic family."""
    return GeodesicFamily(m0, m1)


def velocity(family: GeodesicFamily, x):
    """Geodesic velocity v(x) = f_1(x) - f_0(x)."""
    return family.m1.f(x) - family.m0.f(x)


def geodesic_metric(family: GeodesicFamily, t: float) -> MetricPotential:
    """The interpolated metric at time t with margin min of the endpoints.

    The interpolant of two admissible potentials is admissible because
    x(1-x) G_t'' is the same linear interpolation, so the pointwise minimum
    of the endpoint margins is a valid certificate.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic time must lie in [0, 1], got {t}")
    c0 = np.asarray(family.m0.f_coeffs if family.m0.f_coeffs else (0.0,))
    c1 = np.asarray(family.m1.f_coeffs if family.m1.f_coeffs else (0.0,))
    coeffs = npoly.polyadd((1.0 - t) * c0, t * c1)
    margin = min(family.m0.convexity_margin, family.m1.convexity_margin)
    resolution = min(family.m0.grid_resolution, family.m1.grid_resolution)
    return MetricPotential(tuple(float(c) for c in coeffs), margin, resolution)


@dataclass(frozen=True)
class DualPoint:
    """Solution of the dual root problem G'(x) = rho."""

    x: float
    U: float


def legendre_dual(m: MetricPotential, rho: float, tol: float = 1e-12,
                  max_iter: int = 100) -> DualPoint:
    """Legendre transform U(rho) = x rho - G(x) at the root of G'(x) = rho.

    Safeguarded Newton iteration on the open interval (0, 1): the initial
    bracket [expit(rho - B), expit(rho + B)] with B an upper bound for |f'|
    is guaranteed to straddle the root, Newton steps falling outside the
    current bracket are replaced by bisection, and the residual target is
    |G'(x) - rho| <= tol * max(1, |rho|).
    """
    rho = float(rho)
    if not math.isfinite(rho):
        raise ValueError(f"rho must be finite, got {rho}")
    bound = m.slope_bound()
    lo = min(max(float(expit(rho - bound)), 1e-300), 1.0 - 1e-16)
    hi = min(max(float(expit(rho + bound)), 1e-300), 1.0 - 1e-16)
    target = tol * max(1.0, abs(rho))
    x = min(max(float(expit(rho)), lo), hi)
    for _ in range(max_iter):
        residual = m.grad(x) - rho
        if abs(residual) <= target:
            return DualPoint(x, x * rho - float(m.value(x)))
        if residual > 0.0:
            hi = x
        else:
            lo = x
        step = residual / m.hess(x)
        candidate = x - step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        x = candidate
    raise RootError(
        f"dual root solve for rho = {rho} did not reach |G'(x)-rho| <= {target:.3g} "
        f"in {max_iter} iterations"
    )


@dataclass(frozen=True)
class DerivativeBundle:
    """U and its first and second derivatives along the geodesic.

    All values are evaluated at the moment coordinate x solving
    G_t'(x) = rho; v is the geodesic velocity.
    """

    x: float
    U: float
    dU_drho: float
    d2U_drho2: float
    dU_dt: float
    d2U_dt2: float
    d2U_dtdrho: float


def ma_derivatives(family: GeodesicFamily, t: float, rho: float,
                   tol: float = 1e-12) -> DerivativeBundle:
    """Closed-form derivative bundle of the geodesic potential U_t(rho).

    dU/drho = x, d2U/drho2 = 1/G_t''(x), dU/dt = -v(x),
    d2U/dt2 = v'(x)^2 / G_t''(x), d2U/dt drho = -v'(x) / G_t''(x).
    """
    metric = geodesic_metric(family, t)
    point = legendre_dual(metric, rho, tol=tol)
    x = point.x
    hess = float(metric.hess(x))
    v = float(velocity(family, x))
    dv = float(family.velocity_d1(x))
    return DerivativeBundle(
        x=x,
        U=point.U,
        dU_drho=x,
        d2U_drho2=1.0 / hess,
        dU_dt=-v,
        d2U_dt2=dv * dv / hess,
        d2U_dtdrho=-dv / hess,
    )
