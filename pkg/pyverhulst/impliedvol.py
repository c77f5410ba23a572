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

"""Flat-volatility inversion of put prices and delta-to-strike conversion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from . import blackscholes as bs
from .errors import NoRootError, ParameterError, PriceBoundsError
from .market_model import DeltaTag

logger = logging.getLogger(__name__)

SIGMA_LOW = 1e-6
SIGMA_HIGH = 5.0
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class VolQuote:
    sigma: float
    converged: bool
    iterations: int


def _point(s0: float, strike: float, maturity: float, r_d: float, r_f: float, sigma: float) -> bs.BsPoint:
    return bs.BsPoint(math.log(s0), sigma * sigma * maturity, math.log(strike), r_d * maturity, r_f * maturity)


def flat_put(s0: float, strike: float, maturity: float, r_d: float, r_f: float, sigma: float) -> float:
    return bs.put_price(_point(s0, strike, maturity, r_d, r_f, sigma))


def vega(s0: float, strike: float, maturity: float, r_d: float, r_f: float, sigma: float) -> float:
    """dP/dsigma = 2 sigma T dP_BS/dy."""
    return 2.0 * sigma * maturity * bs.partial(_point(s0, strike, maturity, r_d, r_f, sigma), (0, 1))


def put_bounds(s0: float, strike: float, maturity: float, r_d: float, r_f: float) -> tuple[float, float]:
    discounted_strike = strike * math.exp(-r_d * maturity)
    return max(discounted_strike - s0 * math.exp(-r_f * maturity), 0.0), discounted_strike


def implied_vol(price: float, s0: float, strike: float, maturity: float, r_d: float = 0.0, r_f: float = 0.0,
                tol: float = 1e-12) -> VolQuote:
    """Newton on sigma inside the bracket [SIGMA_LOW, SIGMA_HIGH], Brent once a step leaves it.

    Converged means the repriced value is within tol * s0 of the target. Rates
    are flat annual rates over [0, T].
    """
    if not (s0 > 0.0 and strike > 0.0 and maturity > 0.0):
        raise ParameterError("implied_vol", "spot, strike and maturity must be positive")
    lower, upper = put_bounds(s0, strike, maturity, r_d, r_f)
    threshold = tol * s0
    if price < lower - threshold:
        raise PriceBoundsError("lower", price, lower)
    if price >= upper:
        raise PriceBoundsError("upper", price, upper)
    if price - lower <= threshold:
        logger.debug(f"Price {price!r} sits on the intrinsic bound, reporting the lower volatility limit")
        return VolQuote(SIGMA_LOW, False, 0)
    lo, hi = SIGMA_LOW, SIGMA_HIGH
    if flat_put(s0, strike, maturity, r_d, r_f, hi) < price - threshold:
        return VolQuote(hi, False, 0)
    # Brenner-Subrahmanyam start, kept inside the bracket
    sigma = min(max(math.sqrt(2.0 * math.pi / maturity) * price / s0, 0.05), 1.0)
    for iteration in range(1, MAX_ITERATIONS + 1):
        error = flat_put(s0, strike, maturity, r_d, r_f, sigma) - price
        if abs(error) < threshold:
            return VolQuote(sigma, True, iteration)
        if error > 0.0:
            hi = sigma
        else:
            lo = sigma
        slope = vega(s0, strike, maturity, r_d, r_f, sigma)
        candidate = sigma - error / slope if slope > 0.0 else -1.0
        if not lo < candidate < hi:
            return _brent(price, s0, strike, maturity, r_d, r_f, lo, hi, threshold, iteration)
        sigma = candidate
    error = flat_put(s0, strike, maturity, r_d, r_f, sigma) - price
    return VolQuote(sigma, abs(error) < threshold, MAX_ITERATIONS)


def _brent(price: float, s0: float, strike: float, maturity: float, r_d: float, r_f: float, lo: float, hi: float,
           threshold: float, iterations: int) -> VolQuote:
    def error(sigma: float) -> float:
        return flat_put(s0, strike, maturity, r_d, r_f, sigma) - price

    if error(lo) >= 0.0:
        return VolQuote(lo, abs(error(lo)) < threshold, iterations)
    if error(hi) <= 0.0:
        return VolQuote(hi, abs(error(hi)) < threshold, iterations)
    sigma, result = brentq(error, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=MAX_ITERATIONS,
                           full_output=True, disp=False)
    logger.debug(f"Newton left the bracket after {iterations} steps, Brent took {result.iterations} more")
    return VolQuote(sigma, abs(error(sigma)) < threshold, iterations + result.iterations)


def strike_from_delta(target: DeltaTag | float, sigma_ref: float, s0: float, maturity: float,
                      r_d: float = 0.0, r_f: float = 0.0) -> float:
    """Strike of a premium-excluded spot-delta put, or the forward for ATM.

    -exp(-r_f T) N(-d_+) = delta is solved in closed form for d_+.
    """
    if not sigma_ref > 0.0:
        raise ParameterError("sigma_ref", "must be positive")
    forward = s0 * math.exp((r_d - r_f) * maturity)
    delta = target.delta if isinstance(target, DeltaTag) else float(target)
    if delta is None:
        return forward
    level = abs(delta) * math.exp(r_f * maturity)
    if not 0.0 < level < 1.0:
        raise NoRootError(f"no strike has spot put delta {delta} with r_f={r_f}, T={maturity}")
    d_plus = -float(norm.ppf(level))
    sqrt_t = math.sqrt(maturity)
    return forward * math.exp(0.5 * sigma_ref * sigma_ref * maturity - d_plus * sigma_ref * sqrt_t)
