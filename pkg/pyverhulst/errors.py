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

from __future__ import annotations


class PyVerhulstError(Exception):
    pass


class ParameterError(PyVerhulstError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(PyVerhulstError, ValueError):
    pass


class UnsupportedError(PyVerhulstError, NotImplementedError):
    pass


class DivergenceError(PyVerhulstError, ArithmeticError):
    pass


class GridError(PyVerhulstError, ValueError):
    pass


class QuadratureAccuracyError(PyVerhulstError, ArithmeticError):
    def __init__(self, message: str, best_estimate: float):
        super().__init__(f"{message} (best estimate {best_estimate!r})")
        self.best_estimate = best_estimate


class PriceBoundsError(PyVerhulstError, ValueError):
    def __init__(self, bound: str, price: float, limit: float):
        relation = "below" if bound == "lower" else "above"
        super().__init__(f"price {price!r} is {relation} the {bound} no-arbitrage bound {limit!r}")
        self.bound = bound
        self.price = price
        self.limit = limit


class NoRootError(PyVerhulstError, ValueError):
    pass


class CalibrationInputError(PyVerhulstError, ValueError):
    pass


class QuotesFormatError(PyVerhulstError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
