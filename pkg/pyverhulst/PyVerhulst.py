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
from collections.abc import Sequence

from .calibration import CalibrationProblem, CalibrationResult, calibrate_bootstrap
from .impliedvol import implied_vol, strike_from_delta
from .market_model import DeltaTag, ModelSpec, OptionQuote, PiecewiseParams, check_martingale_condition, verhulst
from .montecarlo import McConfig, McEstimate, price_mc
from .pricer import Backend, PricingState, PriceResult, price_second_order_general
from .zeroth_order import DEFAULT_SUB_STEPS


class PyVerhulst:
    def __init__(self, params: PiecewiseParams, model: ModelSpec | None = None,
                 backend: Backend = Backend.PIECEWISE_RECURSION, sub_steps: int = DEFAULT_SUB_STEPS):
        self.params = params
        self.model = model or verhulst()
        self.backend = backend
        self.sub_steps = sub_steps
        self.state: PricingState | None = None

    def flat_rates(self, maturity: float) -> tuple[float, float]:
        int_rd, int_rf = self.params.integrated_rates(maturity)
        return int_rd / maturity, int_rf / maturity

    def strike(self, delta: DeltaTag, maturity: float, sigma_ref: float) -> float:
        return strike_from_delta(delta, sigma_ref, self.params.s0, maturity, *self.flat_rates(maturity))

    def price(self, strike: float | Sequence[float], maturity: float) -> PriceResult | list[PriceResult]:
        k = math.log(strike) if isinstance(strike, (int, float)) else [math.log(s) for s in strike]
        cut = self.params.with_node(maturity)
        return price_second_order_general(self.model, cut, k, maturity, self.backend, sub_steps=self.sub_steps)

    def implied_vol(self, strike: float, maturity: float) -> float:
        result = self.price(strike, maturity)
        return implied_vol(result.total, self.params.s0, strike, maturity, *self.flat_rates(maturity)).sigma

    def monte_carlo(self, strike: float, maturity: float, config: McConfig | None = None) -> McEstimate:
        return price_mc(self.params, math.log(strike), maturity, config or McConfig(), self.model)

    def next_maturity(self) -> PriceResult:
        """Prices at the forward of the next grid maturity, keeping the operator state."""
        if self.state is None or self.state.complete:
            self.state = PricingState.start(self.model, self.params, self.sub_steps)
        self.state = self.state.extend()
        maturity = self.state.maturity
        int_rd, int_rf = self.params.integrated_rates(maturity)
        forward = self.params.s0 * math.exp(int_rd - int_rf)
        return self.state.price(math.log(forward))

    def calibrate(self, quotes: Sequence[OptionQuote], **options) -> CalibrationResult:
        result = calibrate_bootstrap(CalibrationProblem(self.params, tuple(quotes), model=self.model,
                                                        sub_steps=self.sub_steps, **options))
        self.params = result.params
        self.state = None
        return result

    def get_status(self) -> str:
        report = check_martingale_condition(self.params, self.model)
        reached = 'not started' if self.state is None else f'T={self.state.maturity:g}'
        return (f"{self.model.name} on {self.params.n_intervals} interval(s), {self.backend.value} backend, "
                f"{reached}, martingale {'ok' if report.ok else 'violated'}")
