"""
Quadrature rules on the reference triangle and the reference interval.

Reference triangle: {(x, y): x >= 0, y >= 0, x + y <= 1} (area 1/2).
Reference interval: [0, 1].

Triangle rules are collapsed (Duffy) tensor rules: Gauss-Legendre in the
collapsed direction and Gauss-Jacobi (weight 1 - s) in the other, so every
weight is positive and the one-point rule is the centroid rule.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi

from app.utils.errors import InvalidArgumentError

MAX_QUADRATURE_ORDER = 8


@dataclass(frozen=True)
class QuadratureRule:
    """
    Points and weights on a reference element.

    Attributes:
    -----------
    points : np.ndarray
        (nq, dim) reference coordinates.
    weights : np.ndarray
        (nq,) weights summing to the reference measure.
    order : int
        Polynomial degree integrated exactly.
    """
    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def _check_order(order: int) -> int:
    if not isinstance(order, (int, np.integer)) or order < 0 or order > MAX_QUADRATURE_ORDER:
        raise InvalidArgumentError(
            f"Unsupported quadrature order {order}; supported orders are 0..{MAX_QUADRATURE_ORDER}",
            {"order": order},
        )
    return int(order)


def _points_for(order: int) -> int:
    return max(1, math.ceil((order + 1) / 2))


@lru_cache(maxsize=None)
def segment_quadrature(order: int) -> QuadratureRule:
    """
    Gauss-Legendre rule on [0, 1] exact for polynomials of degree ``order``.
    """
    order = _check_order(order)
    x, w = np.polynomial.legendre.leggauss(_points_for(order))
    points = 0.5 * (x + 1.0)
    weights = 0.5 * w
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points[:, None], weights=weights, order=order)


@lru_cache(maxsize=None)
def triangle_quadrature(order: int) -> QuadratureRule:
    """
    Collapsed Gauss rule on the reference triangle exact for total degree ``order``.
    """
    order = _check_order(order)
    n = _points_for(order)
    r, wr = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    s, ws = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    ws = 0.25 * ws

    # y = s, x = r (1 - s); the Jacobian (1 - s) is carried by the Jacobi weight
    rr, ss = np.meshgrid(r, s, indexing="ij")
    wrr, wss = np.meshgrid(wr, ws, indexing="ij")
    points = np.column_stack([(rr * (1.0 - ss)).ravel(), ss.ravel()])
    weights = (wrr * wss).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points, weights=weights, order=order)
