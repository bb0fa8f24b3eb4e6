"""Chebyshev interpolation of scalar functions with a validated remainder bound.

Interpolates through Chebyshev points of the second kind (endpoints included),
converts the result to the power basis used everywhere else in this package,
and attaches a remainder bound measured on a dense uniform grid with a 25%
safety inflation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .poly import Polynomial

VALIDATION_GRID_POINTS = 10_001
REMAINDER_INFLATION = 1.25


@dataclass(frozen=True)
class ChebyshevFit:
    """Power-basis interpolant of a scalar function on a closed interval."""

    poly: Polynomial  # single-variable, power basis
    domain: tuple[float, float]
    degree: int
    remainder_bound: float


def second_kind_points(degree: int) -> np.ndarray:
    """Chebyshev points of the second kind on [-1, 1]: cos(k*pi/n), k = 0..n."""
    if degree == 0:
        return np.array([0.0])
    k = np.arange(degree + 1)
    return np.cos(np.pi * k / degree)


def chebyshev_fit(f: Callable[[float], float], domain: tuple[float, float], degree: int) -> ChebyshevFit:
    """Fit a degree-``degree`` interpolant to ``f`` on ``domain``.

    The remainder bound is the max absolute error over a uniform grid of
    VALIDATION_GRID_POINTS points, inflated by REMAINDER_INFLATION.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if not np.isfinite([lo, hi]).all() or hi <= lo:
        raise ValueError(f"degenerate domain [{lo}, {hi}]")

    t_nodes = second_kind_points(degree)
    x_nodes = 0.5 * (hi - lo) * t_nodes + 0.5 * (hi + lo)
    values = np.array([float(f(x)) for x in x_nodes])
    if not np.isfinite(values).all():
        raise ValueError("function returned non-finite values at interpolation nodes")

    if degree == 0:
        cheb_coeffs = values
    else:
        cheb_coeffs = npcheb.chebfit(t_nodes, values, degree)
    power_in_t = npcheb.cheb2poly(cheb_coeffs)

    # Compose with t = alpha*x + beta mapping the domain onto [-1, 1].
    alpha = 2.0 / (hi - lo)
    beta = -(hi + lo) / (hi - lo)
    t_of_x = Polynomial(1, {(1,): alpha, (0,): beta})
    poly = Polynomial.zero(1)
    t_power = Polynomial.constant(1, 1.0)
    for c in power_in_t:
        poly = poly + t_power.scale(float(c))
        t_power = t_power * t_of_x

    grid = np.linspace(lo, hi, VALIDATION_GRID_POINTS)
    f_grid = np.array([float(f(x)) for x in grid])
    if not np.isfinite(f_grid).all():
        raise ValueError("function returned non-finite values on the validation grid")
    p_grid = poly.evaluate_many(grid[:, None])
    max_err = float(np.max(np.abs(f_grid - p_grid)))

    return ChebyshevFit(poly=poly, domain=(lo, hi), degree=degree, remainder_bound=REMAINDER_INFLATION * max_err)
