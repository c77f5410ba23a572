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

"""Bootstrap calibration of per-interval (kappa, theta, lambda, rho).

Interval i is fitted against the quotes maturing at T_{i+1} with every
earlier interval frozen; the operator states through T_i are reused for each
candidate, so one objective evaluation only integrates over [T_i, T_{i+1}].
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .errors import (CalibrationInputError, DivergenceError, NoRootError, ParameterError, PriceBoundsError,
                     QuotesFormatError)
from .impliedvol import SIGMA_HIGH, flat_put, implied_vol, put_bounds, strike_from_delta
from .market_model import (DeltaTag, ModelSpec, OptionQuote, PiecewiseParams, check_martingale_condition,
                           parse_tenor, verhulst)
from .pricer import PricingState
from .zeroth_order import DEFAULT_SUB_STEPS

logger = logging.getLogger(__name__)

FIELDS = ("kappa", "theta", "lam", "rho")
DEFAULT_BOUNDS = {
    "kappa": (1e-3, 50.0),
    "theta": (1e-3, 2.0),
    "lam": (1e-3, 3.0),
    "rho": (-0.999, 0.999),
}
# finite objective for candidates the model cannot price
PENALTY = 1.0
BPS = 1e4


class RhoMode(Enum):
    PER_INTERVAL = "per_interval"
    GLOBAL = "global"


class ResolvedQuote(NamedTuple):
    quote: OptionQuote
    strike: float

    @property
    def log_strike(self) -> float:
        return math.log(self.strike)


@dataclass(frozen=True)
class CalibrationProblem:
    params: PiecewiseParams
    quotes: tuple[OptionQuote, ...]
    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    regularization_weight: float = 1e-4
    rho_mode: RhoMode = RhoMode.PER_INTERVAL
    max_evals: int = 500
    sub_steps: int = DEFAULT_SUB_STEPS
    model: ModelSpec = field(default_factory=verhulst)

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple(sorted(self.quotes, key=lambda q: q.maturity)))
        bounds = dict(DEFAULT_BOUNDS)
        bounds.update(self.bounds)
        object.__setattr__(self, "bounds", bounds)
        self.validate()

    def validate(self):
        for name, (lo, hi) in self.bounds.items():
            if name not in DEFAULT_BOUNDS:
                raise CalibrationInputError(f"unknown bound {name!r}")
            if not lo < hi:
                raise CalibrationInputError(f"bounds for {name} are empty: [{lo}, {hi}]")
            if name == "rho" and (lo < -1.0 or hi > 1.0):
                raise CalibrationInputError("rho bounds must lie in [-1, 1]")
            if name != "rho" and lo <= 0.0:
                raise CalibrationInputError(f"{name} bounds must be positive")
        if self.regularization_weight < 0.0:
            raise CalibrationInputError("regularization weight must be non-negative")
        if self.max_evals < 1:
            raise CalibrationInputError("max_evals must be at least 1")
        grid = self.params.grid
        for quote in self.quotes:
            try:
                quote.check_against(grid)
            except ParameterError as e:
                raise CalibrationInputError(str(e)) from None
            if quote.implied_vol > SIGMA_HIGH:
                raise CalibrationInputError(f"implied vol {quote.implied_vol} exceeds {SIGMA_HIGH}")
        for i in range(grid.n_intervals):
            if not self.quotes_for(i):
                raise CalibrationInputError(f"no quotes mature at T_{i + 1}={grid.boundaries[i + 1]}")
        for resolved in (r for i in range(grid.n_intervals) for r in self.resolved_quotes(i)):
            self._check_bounds(resolved)

    def _check_bounds(self, resolved: ResolvedQuote):
        q = resolved.quote
        r_d, r_f = self.flat_rates(q.maturity)
        lower, upper = put_bounds(self.params.s0, resolved.strike, q.maturity, r_d, r_f)
        price = flat_put(self.params.s0, resolved.strike, q.maturity, r_d, r_f, q.implied_vol)
        if not lower < price < upper:
            raise CalibrationInputError(f"quote at T={q.maturity}, K={resolved.strike} violates the put "
                                        f"price bounds [{lower}, {upper}]")

    def flat_rates(self, maturity: float) -> tuple[float, float]:
        int_rd, int_rf = self.params.integrated_rates(maturity)
        return int_rd / maturity, int_rf / maturity

    def quotes_for(self, i: int) -> list[OptionQuote]:
        return [q for q in self.quotes if self.params.grid.node_index(q.maturity) == i + 1]

    def resolved_quotes(self, i: int) -> list[ResolvedQuote]:
        """Quotes of interval i with strikes; delta quotes use their own vol as reference."""
        result = []
        for q in self.quotes_for(i):
            if q.strike is not None:
                result.append(ResolvedQuote(q, q.strike))
                continue
            r_d, r_f = self.flat_rates(q.maturity)
            try:
                strike = strike_from_delta(q.delta, q.implied_vol, self.params.s0, q.maturity, r_d, r_f)
            except NoRootError as e:
                raise CalibrationInputError(str(e)) from None
            result.append(ResolvedQuote(q, strike))
        return result


@dataclass(frozen=True)
class CalibrationResult:
    params: PiecewiseParams
    per_maturity_rmse: tuple[float, ...]
    objective_evals: int
    martingale_ok: bool
    converged: tuple[bool, ...]
    objective_values: tuple[float, ...]

    @property
    def partial(self) -> bool:
        return not all(self.converged)


class _Interval:
    # free coordinates of one interval and how they map onto the parameter set
    def __init__(self, problem: CalibrationProblem, params: PiecewiseParams, i: int, rho_fixed: float | None):
        self.problem = problem
        self.params = params
        self.i = i
        self.rho_fixed = rho_fixed
        self.names = FIELDS if rho_fixed is None else FIELDS[:3]
        self.lower = np.array([problem.bounds[n][0] for n in self.names])
        self.upper = np.array([problem.bounds[n][1] for n in self.names])

    def start(self, source: PiecewiseParams, j: int) -> np.ndarray:
        values = source.values(j)
        return np.clip(np.array([getattr(values, n) for n in self.names]), self.lower, self.upper)

    def candidate(self, x: np.ndarray) -> PiecewiseParams:
        x = np.clip(x, self.lower, self.upper)
        kappa, theta, lam = x[:3]
        rho = self.rho_fixed if self.rho_fixed is not None else x[3]
        return self.params.with_interval(self.i, kappa, theta, lam, rho)


def model_vols(state: PricingState, quotes: Sequence[ResolvedQuote], problem: CalibrationProblem) -> list[float]:
    results = state.price([q.log_strike for q in quotes])
    vols = []
    for q, result in zip(quotes, results):
        r_d, r_f = problem.flat_rates(q.quote.maturity)
        vol = implied_vol(result.total, problem.params.s0, q.strike, q.quote.maturity, r_d, r_f)
        if not vol.converged:
            lower, _ = put_bounds(problem.params.s0, q.strike, q.quote.maturity, r_d, r_f)
            raise PriceBoundsError("lower", result.total, lower)
        vols.append(vol.sigma)
    return vols


def objective(x: np.ndarray, frozen_state: PricingState, quotes: Sequence[ResolvedQuote], interval: _Interval,
              reference: np.ndarray) -> float:
    """Weighted squared implied-vol misfit plus a pull toward ``reference``."""
    candidate = interval.candidate(x)
    regularization = interval.problem.regularization_weight * float(np.sum((np.clip(x, interval.lower, interval.upper)
                                                                            - reference) ** 2))
    try:
        state = frozen_state.extend(candidate)
        vols = model_vols(state, quotes, interval.problem)
    except (PriceBoundsError, DivergenceError, ParameterError, ArithmeticError) as e:
        logger.warning(f"Penalised candidate {np.round(x, 6).tolist()} on interval {interval.i}: {e}")
        return PENALTY + regularization
    misfit = math.fsum(q.quote.weight * (vol - q.quote.implied_vol) ** 2 for q, vol in zip(quotes, vols))
    logger.debug(f"Interval {interval.i} candidate {np.round(x, 6).tolist()}: misfit {misfit:.3e}")
    return misfit + regularization


def rebuild_state(problem: CalibrationProblem, params: PiecewiseParams, intervals: int) -> PricingState:
    """Pricing state through T_intervals computed from scratch."""
    state = PricingState.start(problem.model, params, problem.sub_steps)
    for _ in range(intervals):
        state = state.extend(params)
    return state


def _optimize(fun, x0: np.ndarray, max_evals: int) -> tuple[np.ndarray, float, int, bool]:
    start_value = fun(x0)
    if start_value <= 1e-14:
        return x0, start_value, 1, True
    evals = 1
    best_x, best_value, success = x0, start_value, False
    # one restart from the best vertex if the first simplex stagnates
    for _ in range(2):
        budget = max_evals - evals
        if budget <= 0:
            break
        result = minimize(fun, best_x, method="Nelder-Mead",
                          options={"maxfev": budget, "xatol": 1e-7, "fatol": 1e-14})
        evals += result.nfev
        if result.fun <= best_value:
            best_x, best_value = result.x, float(result.fun)
        success = bool(result.success)
        if success:
            break
    return best_x, best_value, evals, success


def calibrate_bootstrap(prob: CalibrationProblem) -> CalibrationResult:
    params = prob.params
    state = PricingState.start(prob.model, params, prob.sub_steps)
    rmse, converged, values = [], [], []
    total_evals = 0
    rho_fixed = None
    for i in range(params.n_intervals):
        quotes = prob.resolved_quotes(i)
        interval = _Interval(prob, params, i, rho_fixed)
        # search starts at the initial guess of interval i; interval 0 is pulled toward that guess,
        # later ones toward their fitted predecessor
        x0 = interval.start(params, i)
        reference = interval.start(params, max(i - 1, 0))

        def fun(x: np.ndarray) -> float:
            return objective(x, state, quotes, interval, reference)

        best, value, evals, ok = _optimize(fun, x0, prob.max_evals)
        total_evals += evals
        params = interval.candidate(best)
        if prob.rho_mode is RhoMode.GLOBAL and rho_fixed is None:
            rho_fixed = params.rho[i]
        if not ok:
            logger.warning(f"Optimizer did not converge on interval {i} after {evals} evaluations")
        state = state.extend(params)
        try:
            vols = model_vols(state, quotes, prob)
            errors = [(v - q.quote.implied_vol) * BPS for q, v in zip(quotes, vols)]
            rmse.append(math.sqrt(math.fsum(e * e for e in errors) / len(errors)))
        except (PriceBoundsError, ArithmeticError):
            rmse.append(math.inf)
            ok = False
        converged.append(ok)
        values.append(value)
        logger.info(f"Interval {i}: kappa={params.kappa[i]:.6g} theta={params.theta[i]:.6g} "
                    f"lambda={params.lam[i]:.6g} rho={params.rho[i]:.6g} rmse={rmse[-1]:.4f}bp")
    report = check_martingale_condition(params, prob.model)
    return CalibrationResult(params, tuple(rmse), total_evals, report.ok, tuple(converged), tuple(values))


def read_quotes_csv(path: str | Path) -> list[OptionQuote]:
    """Quotes from ``maturity,delta_tag_or_strike,implied_vol[,weight]`` rows."""
    quotes = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = None
        for line, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in row]
            if header is None:
                header = cells
                if header[:3] != ["maturity", "delta_tag_or_strike", "implied_vol"] or len(header) > 4:
                    raise QuotesFormatError(line, "expected header maturity,delta_tag_or_strike,implied_vol[,weight]")
                continue
            if len(cells) not in (3, 4) or len(cells) > len(header):
                raise QuotesFormatError(line, f"expected {len(header)} columns, got {len(cells)}")
            try:
                maturity = parse_tenor(cells[0])
                tag = cells[1].upper()
                delta = DeltaTag[tag] if tag in DeltaTag.__members__ else None
                strike = None if delta is not None else float(cells[1])
                weight = float(cells[3]) if len(cells) == 4 else 1.0
                quotes.append(OptionQuote(maturity, float(cells[2]), strike, delta, weight))
            except (ValueError, KeyError) as e:
                raise QuotesFormatError(line, str(e)) from None
    if header is None:
        raise QuotesFormatError(1, "empty quotes file")
    return quotes
