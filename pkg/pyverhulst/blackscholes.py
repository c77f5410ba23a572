#
# pyverhulst
#
# Authors:
#  pyverhulst contributors
#
# Copyright (C) 2026 pyverhulst contributors
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be
# included in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND
# NONINFRINGEMENT. IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE
# LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION
# WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.
#

"""Black-Scholes put kernel in log-spot / integrated-variance coordinates.

P_BS(x, y) = e^k e^{-R_d} N(-d_-) - e^x e^{-R_f} N(-d_+) with
d_+- = (x - k + R_d - R_f) / sqrt(y) +- sqrt(y) / 2, where R_d and R_f are the
integrated domestic and foreign rates. Every mixed partial derivative is
reduced to pure x-derivatives through dP/dy = (d2P/dx2 - dP/dx) / 2, and the
pure x-derivatives are Hermite polynomials times the normal density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from numpy.polynomial import hermite_e
from scipy.special import ndtr

from .errors import DomainError, UnsupportedError

FloatArray = npt.NDArray[np.float64]

# below this the formula is replaced by its zero-variance limit
Y_FLOOR = 1e-300

SQRT_2PI = math.sqrt(2.0 * math.pi)

SUPPORTED = frozenset({
    (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
    (4, 0), (3, 1), (2, 2), (1, 3), (0, 4),
})


@dataclass(frozen=True)
class BsPoint:
    x: float
    y: float
    k: float
    int_rd: float = 0.0
    int_rf: float = 0.0

    @property
    def drift(self) -> float:
        return self.x - self.k + self.int_rd - self.int_rf

    @property
    def d_minus(self) -> float:
        sqrt_y = math.sqrt(self.y)
        return self.drift / sqrt_y - 0.5 * sqrt_y

    @property
    def d_plus(self) -> float:
        sqrt_y = math.sqrt(self.y)
        return self.drift / sqrt_y + 0.5 * sqrt_y

    @property
    def discounted_strike(self) -> float:
        return math.exp(self.k - self.int_rd)

    @property
    def discounted_spot(self) -> float:
        return math.exp(self.x - self.int_rf)


def put_values(x: FloatArray | float, y: FloatArray | float, k: float,
               int_rd: float = 0.0, int_rf: float = 0.0) -> FloatArray:
    """Vectorised P_BS over arrays of log-spots and integrated variances."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0.0):
        raise DomainError(f"integrated variance must be non-negative, got min {float(np.min(y))}")
    strike = math.exp(k - int_rd)
    spot = np.exp(x - int_rf)
    intrinsic = np.maximum(strike - spot, 0.0)
    small = y < Y_FLOOR
    sqrt_y = np.sqrt(np.where(small, 1.0, y))
    d_minus = (x - k + int_rd - int_rf) / sqrt_y - 0.5 * sqrt_y
    d_plus = d_minus + sqrt_y
    value = strike * ndtr(-d_minus) - spot * ndtr(-d_plus)
    # rounding can push a deep in-the-money value a few ulps under intrinsic
    value = np.maximum(value, 0.0)
    return np.where(small, intrinsic, value)


def put_price(p: BsPoint) -> float:
    if p.y < 0.0:
        raise DomainError(f"integrated variance must be non-negative, got {p.y}")
    if p.y < Y_FLOOR:
        return max(p.discounted_strike - p.discounted_spot, 0.0)
    return float(put_values(p.x, p.y, p.k, p.int_rd, p.int_rf))


@lru_cache(maxsize=None)
def _hermite(m: int) -> tuple[float, ...]:
    return tuple([0.0] * m + [1.0])


def _density_derivative(m: int, d: float, sqrt_y: float) -> float:
    # d^m/dx^m of phi(d_-(x)), with d d_-/dx = 1/sqrt(y)
    return (-1.0) ** m * hermite_e.hermeval(d, _hermite(m)) * math.exp(-0.5 * d * d) / SQRT_2PI / sqrt_y ** m


def _density_sum(n: int, d: float, sqrt_y: float) -> float:
    return math.fsum(_density_derivative(m, d, sqrt_y) for m in range(n - 1))


def partial(p: BsPoint, order: tuple[int, int]) -> float:
    """Mixed partial derivative d^a/dx^a d^b/dy^b of P_BS for order = (a, b)."""
    order = (int(order[0]), int(order[1]))
    if order not in SUPPORTED:
        raise UnsupportedError(f"partial derivative {order} is not supported, expected a + b in 1..4")
    if not p.y > 0.0:
        raise DomainError(f"derivatives need positive integrated variance, got {p.y}")
    a, b = order
    sqrt_y = math.sqrt(p.y)
    d = p.d_minus
    scale = p.discounted_strike / sqrt_y
    if b == 0:
        first = -p.discounted_spot * float(ndtr(-p.d_plus))
        return first + scale * _density_sum(a, d, sqrt_y)
    terms = (math.comb(b, j) * (-1.0) ** (b - j) * _density_sum(a + b + j, d, sqrt_y) for j in range(b + 1))
    return scale * math.fsum(terms) / 2.0 ** b


def partials(p: BsPoint, orders) -> dict[tuple[int, int], float]:
    return {order: partial(p, order) for order in orders}
