"""Symmetric quadrature rules on triangles, in barycentric coordinates.

Weights sum to one; multiply by the element area when integrating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    def __len__(self):
        return len(self.weights)

    def map(self, vx: np.ndarray, vy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Physical quadrature points for vertex arrays of shape (..., 3)."""
        return vx @ self.points.T, vy @ self.points.T


def _orbit(a, b, c):
    return sorted(set(itertools.permutations((a, b, c))))


def _build(orbits, degree):
    pts, wts = [], []
    for bary, w in orbits:
        for p in _orbit(*bary):
            pts.append(p)
            wts.append(w)
    return QuadRule(np.array(pts, dtype=float), np.array(wts, dtype=float), degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    """Dunavant-type symmetric rule exact for polynomials of the given degree.

    Available: 1 (1 pt), 2 (3 pts), 4 (6 pts), 6 (12 pts). Other degrees fall
    back to a collapsed Gauss rule of at least that degree.
    """
    if degree <= 1:
        return _build([((1 / 3, 1 / 3, 1 / 3), 1.0)], 1)
    if degree == 2:
        return _build([((2 / 3, 1 / 6, 1 / 6), 1 / 3)], 2)
    if degree in (3, 4):
        a, b = 0.445948490915965, 0.091576213509771
        return _build([
            ((1 - 2 * a, a, a), 0.223381589678011),
            ((1 - 2 * b, b, b), 0.109951743655322),
        ], 4)
    if degree in (5, 6):
        a, b = 0.249286745170910, 0.063089014491502
        return _build([
            ((1 - 2 * a, a, a), 0.116786275726379),
            ((1 - 2 * b, b, b), 0.050844906370207),
            ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374),
        ], 6)
    return collapsed_gauss_rule(degree)


@lru_cache(maxsize=None)
def collapsed_gauss_rule(degree: int) -> QuadRule:
    """Tensor Gauss-Legendre rule on the square collapsed onto the triangle.

    Not symmetric and uses more points than necessary, but it is exact to any
    requested degree, which makes it a convenient independent reference.
    """
    if degree < 0:
        raise ConfigurationError("degree must be non-negative")
    n = degree // 2 + 2  # Duffy Jacobian adds one degree in the collapsed direction
    g, w = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    s = u.ravel()
    t = (v * (1.0 - u)).ravel()
    weights = (wu * wv * (1.0 - u)).ravel() * 2.0  # reference area 1/2
    points = np.column_stack([1.0 - s - t, s, t])
    return QuadRule(points, weights, degree)


def monomial_integral(p: int, q: int) -> float:
    """Integral of s^p t^q over the reference triangle, divided by its area."""
    from math import factorial

    return 2.0 * factorial(p) * factorial(q) / factorial(p + q + 2)
