"""Desk-scale reconstruction of the balance factorization for the parabola.

Region under y = x^2 on [0, 1] hung slice by slice at lever arm 1 on the
left of a fulcrum at the origin, against the region under y = x on the
right with each slice at its own abscissa:

    left moment of a slice   x^2 * 1
    right moment of a slice  x * x

equal identically, slice by slice.  Summed with the midpoint rule the
balance yields the parabola area (1/3), and the companion quadratures give
the classical segment/triangle ratio 4/3 and centroid height 3/5, all with
O(n^-2) convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARABOLA_AREA = 1.0 / 3.0
SEGMENT_TRIANGLE_RATIO = 4.0 / 3.0
CENTROID_HEIGHT = 3.0 / 5.0


def slice_factorization(x: float) -> tuple[float, float]:
    """(left, right) moments of the slice at abscissa x; equal identically."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("slice abscissa must lie in [0, 1]")
    left = (x * x) * 1.0
    right = x * x
    return left, right


@dataclass
class BalanceLedger:
    """Per-slice bookkeeping of the balance."""

    n: int
    x: np.ndarray
    parabola_slice: np.ndarray
    triangle_slice: np.ndarray
    lever_arm: np.ndarray
    moment_left: np.ndarray
    moment_right: np.ndarray

    @property
    def factorization_residual(self) -> float:
        return float(np.abs(self.moment_left - self.moment_right).max())

    @property
    def M_left(self) -> float:
        return float(self.moment_left.sum() / self.n)

    @property
    def M_right(self) -> float:
        return float(self.moment_right.sum() / self.n)


def balance_ledger(n: int) -> BalanceLedger:
    if n < 2:
        raise ValueError("need at least 2 slices")
    x = (np.arange(n) + 0.5) / n
    para = x * x
    tri = x
    arm = np.ones_like(x)
    return BalanceLedger(n=n, x=x, parabola_slice=para, triangle_slice=tri,
                         lever_arm=arm, moment_left=para * arm,
                         moment_right=tri * x)


def balance_moments(n: int) -> tuple[float, float, float]:
    """(M_left, M_right, area_estimate): midpoint sums of both moment densities.

    The sums agree to rounding slice by slice; the common value estimates
    the parabola area 1/3 with midpoint-rule error O(n^-2).
    """
    led = balance_ledger(n)
    return led.M_left, led.M_right, led.M_right


def segment_triangle_ratio(n: int, chord_height: float = 1.0) -> float:
    """Area of the parabola segment cut by y = c over its inscribed triangle.

    Midpoint quadrature of the vertical slices (c - x^2); the inscribed
    triangle (-sqrt(c), c), (0, 0), (sqrt(c), c) has area c^{3/2}; the ratio
    tends to 4/3 for every chord height.
    """
    if n < 2:
        raise ValueError("need at least 2 slices")
    if chord_height <= 0.0:
        raise ValueError("chord height must be positive")
    c = float(chord_height)
    s = np.sqrt(c)
    x = -s + (np.arange(n) + 0.5) * (2.0 * s / n)
    segment = float(np.sum(c - x * x) * (2.0 * s / n))
    triangle = c * s
    return segment / triangle


def segment_centroid(n: int) -> tuple[float, float]:
    """(height, abscissa) of the centroid of the segment cut by y = 1.

    Vertical slicing keeps the integrands polynomial, so the midpoint rule
    converges O(n^-2) to height 3/5; the abscissa vanishes by symmetry at
    rounding level.
    """
    if n < 2:
        raise ValueError("need at least 2 slices")
    h = 2.0 / n
    x = -1.0 + (np.arange(n) + 0.5) * h
    strip = 1.0 - x * x
    area = float(np.sum(strip) * h)
    ybar = float(np.sum((1.0 - x ** 4) / 2.0) * h) / area
    xbar = float(np.sum(x * strip) * h) / area
    return ybar, xbar


def convergence_ratio(estimator, exact: float, n: int) -> float:
    """error(n) / error(2n); approaches 4 for O(n^-2) estimators."""
    e1 = abs(estimator(n) - exact)
    e2 = abs(estimator(2 * n) - exact)
    return e1 / e2 if e2 != 0.0 else np.inf
