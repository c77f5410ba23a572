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

import pytest

from pyverhulst import Backend, DeltaTag, PyVerhulst, price_second_order_verhulst


def test_facade_walks_the_grid(piecewise_params):
    engine = PyVerhulst(piecewise_params, sub_steps=8)
    assert "not started" in engine.get_status()
    maturities = [engine.next_maturity().maturity for _ in range(3)]
    assert maturities == [1.0 / 12.0, 0.25, 0.5]
    assert "T=0.5" in engine.get_status() and "martingale ok" in engine.get_status()
    assert engine.next_maturity().maturity == pytest.approx(1.0 / 12.0)


def test_facade_prices_like_the_pricer(piecewise_params):
    engine = PyVerhulst(piecewise_params, sub_steps=8)
    direct = price_second_order_verhulst(piecewise_params, math.log(100.0), 0.25, Backend.PIECEWISE_RECURSION,
                                         sub_steps=8)
    assert engine.price(100.0, 0.25).total == direct.total
    assert 0.1 < engine.implied_vol(100.0, 0.25) < 0.3
    strikes = [engine.strike(DeltaTag.PUT25, 0.25, 0.18), engine.strike(DeltaTag.ATM, 0.25, 0.18)]
    assert [r.strike for r in engine.price(strikes, 0.25)] == pytest.approx(strikes)
