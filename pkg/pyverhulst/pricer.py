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

"""Explicit second-order put price.

The price is P_BS evaluated at (x0, int_0^T v0^2 dt) plus nine corrections,
each an iterated integral operator times a partial derivative of P_BS at the
same point. Factors are written (k, l) with k a multiple of alpha_x(t, v0_t)
and l one of the weights in ``Weight``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from . import blackscholes as bs
from .errors import GridError, UnsupportedError
from .integral_engine import (FunctionFactor, OperatorFactor, OperatorState, OperatorTerm, eval_quadrature_batch,
                              extend_to_next_maturity, new_state)
from .market_model import IntervalValues, ModelSpec, PiecewiseParams, verhulst
from .zeroth_order import DEFAULT_SUB_STEPS, PathMethod, ZerothPath, zeroth_path

logger = logging.getLogger(__name__)


class Backend(Enum):
    QUADRATURE = "quadrature"
    PIECEWISE_RECURSION = "recursion"


class Weight(Enum):
    RHO_LAMBDA_V_MU1 = "rho*lambda*v^(mu+1)"
    LAMBDA2_V_2MU = "lambda^2*v^(2mu)"
    ALPHA_XX = "alpha_xx"
    V = "v"
    ONE = "1"
    RHO_LAMBDA_V_2MU1 = "rho*lambda*v^(2mu-1)"
    RHO_LAMBDA_V_MU = "rho*lambda*v^mu"

    def scale(self, values: IntervalValues) -> float:
        if self in (Weight.V, Weight.ONE, Weight.ALPHA_XX):
            return 1.0
        if self is Weight.LAMBDA2_V_2MU:
            return values.lam * values.lam
        return values.rho * values.lam

    def power(self, mu: float) -> float:
        return {
            Weight.RHO_LAMBDA_V_MU1: mu + 1.0,
            Weight.LAMBDA2_V_2MU: 2.0 * mu,
            Weight.ALPHA_XX: 0.0,
            Weight.V: 1.0,
            Weight.ONE: 0.0,
            Weight.RHO_LAMBDA_V_2MU1: 2.0 * mu - 1.0,
            Weight.RHO_LAMBDA_V_MU: mu,
        }[self]


class FactorSpec(NamedTuple):
    k_sign: int
    weight: Weight


class PriceTerm(NamedTuple):
    name: str
    factors: tuple[FactorSpec, ...]
    derivative: tuple[int, int]
    coefficient: float
    squared: bool = False


def price_terms(mu: float) -> list[PriceTerm]:
    """The nine correction terms of the general second-order price."""
    rho_mu1 = FactorSpec(-1, Weight.RHO_LAMBDA_V_MU1)
    lam2 = FactorSpec(-2, Weight.LAMBDA2_V_2MU)
    v = FactorSpec(1, Weight.V)
    alpha_xx = FactorSpec(1, Weight.ALPHA_XX)
    clock = FactorSpec(2, Weight.ONE)
    return [
        PriceTerm("xy", (rho_mu1, v), (1, 1), 2.0),
        PriceTerm("y_clock", (lam2, clock), (0, 1), 1.0),
        PriceTerm("xxy_clock", (rho_mu1, rho_mu1, clock), (2, 1), 2.0),
        PriceTerm("y_alpha_xx", (lam2, alpha_xx, v), (0, 1), 1.0),
        PriceTerm("xxy_alpha_xx", (rho_mu1, rho_mu1, alpha_xx, v), (2, 1), 2.0),
        PriceTerm("xxy_2mu", (rho_mu1, FactorSpec(0, Weight.RHO_LAMBDA_V_2MU1), v), (2, 1), 2.0 * mu),
        PriceTerm("xxy_mu", (rho_mu1, FactorSpec(0, Weight.RHO_LAMBDA_V_MU), v), (2, 1), 2.0),
        PriceTerm("yy", (lam2, v, v), (0, 2), 4.0),
        PriceTerm("xxyy", (rho_mu1, v), (2, 2), 2.0, squared=True),
    ]


class AssembledTerm(NamedTuple):
    spec: PriceTerm
    term: OperatorTerm

    @property
    def derivative(self) -> tuple[int, int]:
        return self.spec.derivative

    @property
    def coefficient(self) -> float:
        return self.spec.coefficient


def _integer_power(weight: Weight, mu: float) -> int:
    power = weight.power(mu)
    if power != int(power):
        raise UnsupportedError(f"the recursion backend needs integer powers of v0, got {power} for mu={mu}")
    return int(power)


def assemble_operator_terms(m: ModelSpec, p: PiecewiseParams) -> list[AssembledTerm]:
    """Piecewise operator data of the nine terms for the recursion backend."""
    if m.affine_structure is None:
        raise UnsupportedError(f"model {m.name} has no affine drift structure for the recursion backend")
    affine = m.affine_structure(p)
    n = p.n_intervals
    values = [p.values(i) for i in range(n)]

    def factor(spec: FactorSpec) -> OperatorFactor:
        k_const = [spec.k_sign * c for c in affine.k_const]
        h = [spec.k_sign * c for c in affine.h]
        if spec.weight is Weight.ALPHA_XX:
            l_const = list(affine.alpha_xx)
        else:
            l_const = [spec.weight.scale(v) for v in values]
        return OperatorFactor(k_const, h, l_const, _integer_power(spec.weight, m.mu))

    return [AssembledTerm(spec, OperatorTerm(p.grid, tuple(factor(f) for f in spec.factors)))
            for spec in price_terms(m.mu)]


class _PathProbe:
    # the integrands of one right-hand side share the time point
    def __init__(self, zeroth: ZerothPath):
        self.zeroth = zeroth
        self.frozen = zeroth.method is PathMethod.EULER_PW
        self.last_t: float | None = None
        self.last = (0.0, 0.0)

    def __call__(self, t: float) -> tuple[float, float]:
        """(v0 entering the exponent, v0 entering the weight) at t."""
        if t != self.last_t:
            v = float(self.zeroth.value_at(t))
            self.last = (self.zeroth.node_value_at(t) if self.frozen else v, v)
            self.last_t = t
        return self.last


def function_terms(m: ModelSpec, p: PiecewiseParams, zeroth: ZerothPath) -> list[list[FunctionFactor]]:
    """Integrands of the nine terms for the quadrature backend."""
    probe = _PathProbe(zeroth)

    def factor(spec: FactorSpec) -> FunctionFactor:
        power = spec.weight.power(m.mu)

        def k(t: float) -> float:
            if spec.k_sign == 0:
                return 0.0
            return spec.k_sign * m.alpha_x(p.at(t), probe(t)[0])

        def l(t: float) -> float:
            values, v = p.at(t), probe(t)[1]
            if spec.weight is Weight.ALPHA_XX:
                return m.alpha_xx(values, v)
            return spec.weight.scale(values) * v ** power

        return FunctionFactor(k, l)

    return [[factor(f) for f in spec.factors] for spec in price_terms(m.mu)]


class Correction(NamedTuple):
    name: str
    operator_value: float
    derivative: tuple[int, int]
    derivative_value: float
    coefficient: float
    contribution: float


@dataclass(frozen=True)
class PriceResult:
    total: float
    base_bs: float
    corrections: tuple[Correction, ...]
    backend: Backend
    log_strike: float
    maturity: float
    integrated_variance: float

    @property
    def strike(self) -> float:
        return math.exp(self.log_strike)

    def correction(self, name: str) -> Correction:
        for c in self.corrections:
            if c.name == name:
                return c
        raise KeyError(name)


def _result(p: PiecewiseParams, specs: Sequence[PriceTerm], operator_values: Sequence[float], k: float,
            maturity: float, y: float, backend: Backend) -> PriceResult:
    int_rd, int_rf = p.integrated_rates(maturity)
    point = bs.BsPoint(p.x0, y, k, int_rd, int_rf)
    base = bs.put_price(point)
    corrections = []
    for spec, value in zip(specs, operator_values):
        if spec.squared:
            value = value * value
        derivative = bs.partial(point, spec.derivative)
        corrections.append(Correction(spec.name, value, spec.derivative, derivative, spec.coefficient,
                                      spec.coefficient * value * derivative))
    total = base + math.fsum(c.contribution for c in corrections)
    return PriceResult(total, base, tuple(corrections), backend, k, maturity, y)


def _cut(p: PiecewiseParams, maturity: float) -> PiecewiseParams:
    if maturity > p.grid.maturity * (1.0 + 1e-12) or not maturity > 0.0:
        raise GridError(f"maturity {maturity} lies outside (0, {p.grid.maturity}]")
    return p.with_node(maturity).truncated(maturity)


def default_path_method(m: ModelSpec, backend: Backend) -> PathMethod:
    if backend is Backend.PIECEWISE_RECURSION:
        return PathMethod.EULER_PW
    return PathMethod.EXPLICIT if m.name == "verhulst" else PathMethod.RK4


def integrated_variance(m: ModelSpec, p: PiecewiseParams, maturity: float, backend: Backend = Backend.QUADRATURE,
                        path_method: PathMethod | None = None, sub_steps: int = DEFAULT_SUB_STEPS) -> float:
    """int_0^T v0(t)^2 dt on the zeroth-order path the backend prices with."""
    cut = _cut(p, maturity)
    zeroth = zeroth_path(m, cut, path_method or default_path_method(m, backend), sub_steps)
    return zeroth.integrated_square(maturity)


def price_second_order_general(m: ModelSpec, p: PiecewiseParams, k: float | Sequence[float], maturity: float,
                               backend: Backend = Backend.QUADRATURE, path_method: PathMethod | None = None,
                               sub_steps: int = DEFAULT_SUB_STEPS, tol: float = 1e-12) -> PriceResult | list[PriceResult]:
    """Second-order put price for one log-strike or a list of log-strikes.

    The recursion backend needs the maturity on the parameter grid and runs on
    the piecewise Euler zeroth-order path; the quadrature backend defaults to
    the explicit path for the verhulst model and RK4 otherwise.
    """
    strikes = [float(k)] if isinstance(k, (int, float)) else [float(v) for v in k]
    if backend is Backend.PIECEWISE_RECURSION:
        if not p.grid.contains(maturity):
            raise GridError(f"maturity {maturity} is not on the parameter grid")
        state = PricingState.start(m, p.truncated(maturity), sub_steps)
        while not state.complete:
            state = state.extend()
        results = state.price(strikes)
    else:
        cut = _cut(p, maturity)
        path_method = path_method or default_path_method(m, backend)
        zeroth = zeroth_path(m, cut, path_method, sub_steps)
        breakpoints = zeroth.grid.boundaries if path_method is PathMethod.EULER_PW else cut.grid.boundaries
        values = eval_quadrature_batch(function_terms(m, cut, zeroth), 0.0, maturity, tol, breakpoints)
        y = zeroth.integrated_square(maturity)
        specs = price_terms(m.mu)
        results = [_result(cut, specs, [float(v[-1]) for v in values], s, maturity, y, backend) for s in strikes]
    logger.debug(f"Priced {len(results)} strike(s) at T={maturity} with {backend.value}")
    return results[0] if isinstance(k, (int, float)) else results


def price_second_order_verhulst(p: PiecewiseParams, k: float | Sequence[float], maturity: float,
                                backend: Backend = Backend.QUADRATURE, **kwargs) -> PriceResult | list[PriceResult]:
    return price_second_order_general(verhulst(), p, k, maturity, backend, **kwargs)


@dataclass(frozen=True)
class PricingState:
    """Operator states of the nine terms through the grid maturity T_i.

    ``extend`` absorbs the next parameter interval and returns a new state,
    so a calibrator can try many candidates against one frozen state.
    """
    model: ModelSpec
    params: PiecewiseParams
    sub_steps: int
    interval: int
    states: tuple[OperatorState, ...]
    integrated_variance: float = 0.0
    specs: tuple[PriceTerm, ...] = field(default=(), compare=False)

    @classmethod
    def start(cls, m: ModelSpec, p: PiecewiseParams, sub_steps: int = DEFAULT_SUB_STEPS) -> PricingState:
        specs = tuple(price_terms(m.mu))
        terms = assemble_operator_terms(m, p)
        return cls(m, p, sub_steps, 0, tuple(new_state(t.term) for t in terms), 0.0, specs)

    @property
    def maturity(self) -> float:
        return self.params.grid.boundaries[self.interval]

    @property
    def complete(self) -> bool:
        return self.interval == self.params.n_intervals

    def extend(self, params: PiecewiseParams | None = None) -> PricingState:
        """Absorbs interval ``self.interval``; ``params`` may change that interval only."""
        if self.complete:
            raise GridError("the pricing state already reaches the last maturity")
        params = params or self.params
        i = self.interval
        end = params.grid.boundaries[i + 1]
        cut = params.truncated(end)
        zeroth = zeroth_path(self.model, cut, PathMethod.EULER_PW, self.sub_steps)
        terms = assemble_operator_terms(self.model, cut)
        states = tuple(extend_to_next_maturity(s, t.term, i, zeroth) for s, t in zip(self.states, terms))
        return PricingState(self.model, params, self.sub_steps, i + 1, states,
                            zeroth.integrated_square(end), self.specs)

    def operator_values(self) -> list[float]:
        return [s.value for s in self.states]

    def price(self, k: float | Sequence[float]) -> PriceResult | list[PriceResult]:
        if self.interval == 0:
            raise GridError("the pricing state has not reached a maturity yet")
        strikes = [float(k)] if isinstance(k, (int, float)) else [float(v) for v in k]
        values = self.operator_values()
        results = [_result(self.params, self.specs, values, s, self.maturity, self.integrated_variance,
                           Backend.PIECEWISE_RECURSION) for s in strikes]
        return results[0] if isinstance(k, (int, float)) else results
