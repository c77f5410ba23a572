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

import math

import numpy as np
import pytest
from scipy.stats import norm

from pyverhulst import blackscholes as bs
from pyverhulst.errors import DomainError, UnsupportedError


def textbook_put(s, k, sigma, t, r, q):
    d1 = (math.log(s / k) + (r - q + 0.5 * sigma * sigma) * t) / (sigma * math.sqrt(t))
    d2 = d1 - sigma * math.sqrt(t)
    return k * math.exp(-r * t) * norm.cdf(-d2) - s * math.exp(-q * t) * norm.cdf(-d1)


def test_put_price_matches_textbook_formula():
    point = bs.BsPoint(math.log(100.0), 0.18 ** 2, math.log(100.0), int_rd=0.02)
    assert bs.put_price(point) == pytest.approx(textbook_put(100.0, 100.0, 0.18, 1.0, 0.02, 0.0), rel=1e-13)
    point = bs.BsPoint(math.log(1.3), 0.25 ** 2 * 0.5, math.log(1.25), int_rd=0.01, int_rf=0.025)
    assert bs.put_price(point) == pytest.approx(textbook_put(1.3, 1.25, 0.25, 0.5, 0.02, 0.05), rel=1e-13)


def test_zero_variance_is_discounted_intrinsic():
    point = bs.BsPoint(math.log(90.0), 0.0, math.log(100.0), int_rd=0.02)
    assert bs.put_price(point) == pytest.approx(100.0 * math.exp(-0.02) - 90.0)
    assert bs.put_price(bs.BsPoint(math.log(110.0), 0.0, math.log(100.0))) == 0.0
    with pytest.raises(DomainError):
        bs.put_price(bs.BsPoint(0.0, -1e-4, 0.0))


def test_put_values_vectorised():
    x = np.log(np.array([80.0, 100.0, 120.0]))
    y = np.array([0.04, 0.0, 0.01])
    values = bs.put_values(x, y, math.log(100.0))
    assert values[1] == 0.0
    assert values[0] == pytest.approx(bs.put_price(bs.BsPoint(x[0], 0.04, math.log(100.0))))
    assert np.all(values >= 0.0)


def _shifted(p: bs.BsPoint, dx: float = 0.0, dy: float = 0.0) -> bs.BsPoint:
    return bs.BsPoint(p.x + dx, p.y + dy, p.k, p.int_rd, p.int_rf)


FD_STEP = 2e-3


def _lower(order: tuple[int, int]) -> tuple[tuple[int, int], bool]:
    """The order one below and whether the missing derivative is in y."""
    a, b = order
    return ((a, b - 1), True) if b > 0 else ((a - 1, 0), False)


def _value(p: bs.BsPoint, order: tuple[int, int]) -> float:
    return bs.put_price(p) if order == (0, 0) else bs.partial(p, order)


def _finite_difference(p: bs.BsPoint, order: tuple[int, int]) -> tuple[float, float]:
    """Richardson-extrapolated central difference of the analytic derivative one order lower.

    Returns the estimate and the natural size of the derivative, |lower| over the length scale
    of the shifted coordinate (y itself, or sqrt(y) for x).
    """
    lower, in_y = _lower(order)
    scale = p.y if in_y else math.sqrt(p.y)

    def central(h: float) -> float:
        if in_y:
            return (_value(_shifted(p, dy=h), lower) - _value(_shifted(p, dy=-h), lower)) / (2.0 * h)
        return (_value(_shifted(p, dx=h), lower) - _value(_shifted(p, dx=-h), lower)) / (2.0 * h)

    h = FD_STEP * scale
    estimate = (4.0 * central(0.5 * h) - central(h)) / 3.0
    return estimate, abs(_value(p, lower)) / scale


@pytest.mark.parametrize("order", sorted(bs.SUPPORTED))
def test_partials_match_finite_differences(order):
    rng = np.random.default_rng(sum(order) * 10 + order[1])
    for _ in range(1000):
        k = rng.uniform(-0.3, 0.3)
        point = bs.BsPoint(k + rng.uniform(-0.3, 0.3), rng.uniform(0.02, 0.3), k, rng.uniform(-0.05, 0.05),
                           rng.uniform(-0.05, 0.05))
        analytic = bs.partial(point, order)
        estimate, size = _finite_difference(point, order)
        assert abs(analytic - estimate) <= 1e-6 * max(abs(analytic), size)


def test_y_derivative_identity():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        point = bs.BsPoint(rng.uniform(-0.5, 0.5), rng.uniform(0.001, 0.5), rng.uniform(-0.5, 0.5),
                           rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05))
        for a, b in ((0, 1), (1, 1), (2, 1), (0, 2)):
            lhs = bs.partial(point, (a, b))
            rhs = 0.5 * (bs.partial(point, (a + 2, b - 1)) - bs.partial(point, (a + 1, b - 1)))
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


def test_unsupported_orders():
    point = bs.BsPoint(0.0, 0.04, 0.0)
    with pytest.raises(UnsupportedError):
        bs.partial(point, (0, 0))
    with pytest.raises(UnsupportedError):
        bs.partial(point, (3, 2))
    with pytest.raises(DomainError):
        bs.partial(bs.BsPoint(0.0, 0.0, 0.0), (1, 0))
