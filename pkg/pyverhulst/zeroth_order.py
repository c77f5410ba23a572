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

"""Deterministic zeroth-order volatility path, the solution of dv = alpha(t, v) dt."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import DivergenceError, GridError, UnsupportedError
from .market_model import FloatArray, IntervalValues, ModelSpec, PiecewiseParams, TimeGrid, verhulst

logger = logging.getLogger(__name__)

DEFAULT_SUB_STEPS = 32
DEFAULT_RK4_STEPS = 2048


class PathMethod(Enum):
    EXPLICIT = "explicit"
    RK4 = "rk4"
    EULER_PW = "euler_pw"


@dataclass(frozen=True)
class ZerothPath:
    grid: TimeGrid
    values: FloatArray
    method: PathMethod
    # exact int v^2 over each segment, when the path knows it
    segment_squares: FloatArray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.grid.boundaries),):
            raise GridError(f"path has {values.size} values for {len(self.grid.boundaries)} nodes")
        if self.segment_squares is not None:
            squares = np.asarray(self.segment_squares, dtype=np.float64)
            object.__setattr__(self, "segment_squares", squares)
            if squares.shape != (self.grid.n_intervals,):
                raise GridError(f"path has {squares.size} segment integrals for {self.grid.n_intervals} segments")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise DivergenceError(f"{self.method.value} zeroth-order path left the positive half-line")

    @property
    def v0(self) -> float:
        return float(self.values[0])

    @property
    def nodes(self) -> FloatArray:
        return self.grid.as_array()

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.nodes, self.values)

    def value_at(self, t: float | FloatArray) -> float | FloatArray:
        if self.method is PathMethod.EULER_PW:
            return np.interp(t, self.nodes, self.values)
        return self._spline(t)

    def node_index_at(self, t: float) -> int:
        return self.grid.interval_index(t)

    def node_value_at(self, t: float) -> float:
        """Value at the left fine node of the segment holding t."""
        return float(self.values[self.node_index_at(t)])

    def segment(self, j: int) -> tuple[float, float, float]:
        """(start value, increment over the segment, segment length) of segment j."""
        deltas = self.grid.deltas()
        return float(self.values[j]), float(self.values[j + 1] - self.values[j]), float(deltas[j])

    def integrated_square(self, maturity: float) -> float:
        index = self.grid.node_index(maturity)
        if index is None:
            raise GridError(f"maturity {maturity} is not a node of the zeroth-order grid")
        if index == 0:
            return 0.0
        if self.segment_squares is not None:
            return math.fsum(self.segment_squares[:index])
        v = self.values[:index + 1]
        if self.method is PathMethod.EULER_PW:
            # Simpson is exact for the square of a linear segment
            a, b = v[:-1], v[1:]
            return math.fsum(self.grid.deltas()[:index] * (a * a + a * b + b * b) / 3.0)
        return float(simpson(v * v, x=self.nodes[:index + 1]))

    def truncated(self, maturity: float) -> ZerothPath:
        grid = self.grid.truncated(maturity)
        squares = None if self.segment_squares is None else self.segment_squares[:grid.n_intervals]
        return ZerothPath(grid, self.values[:len(grid.boundaries)], self.method, squares)


def refine_grid(grid: TimeGrid, sub_steps: int = DEFAULT_SUB_STEPS) -> TimeGrid:
    return grid.refined(sub_steps)


def _logistic(v: float, values: IntervalValues, dt: float) -> float:
    kappa, theta = values.kappa, values.theta
    return theta / (1.0 + (theta / v - 1.0) * math.exp(-kappa * theta * dt))


def _logistic_square(v: float, values: IntervalValues, dt: float) -> float:
    """int_0^dt v(t)^2 dt of the logistic solution started at v.

    With g = 1 - v / theta and m = exp(-kappa theta dt) - 1 the integral is
    theta^2 / (kappa theta) * (kappa theta dt + log(1 + g m) + (1 - g) g m / (1 + g m)).
    """
    rate = values.kappa * values.theta
    if rate * dt == 0.0:
        return v * v * dt
    g = 1.0 - v / values.theta
    gm = g * math.expm1(-rate * dt)
    return values.theta * values.theta / rate * (rate * dt + math.log1p(gm) + (1.0 - g) * gm / (1.0 + gm))


def _explicit_square(p: PiecewiseParams, start: float, end: float) -> float:
    total = 0.0
    for i, (a, b) in enumerate(zip(p.grid.boundaries, p.grid.boundaries[1:])):
        lo, hi = max(start, a), min(end, b)
        if hi > lo:
            total += _logistic_square(v0_explicit_verhulst(p, lo), p.values(i), hi - lo)
    return total


def _require_verhulst(model: ModelSpec | None):
    if model is not None and model.name != "verhulst":
        raise UnsupportedError(f"the explicit zeroth-order solution only exists for the verhulst model, not {model.name}")


def v0_explicit_verhulst(p: PiecewiseParams, t: float, model: ModelSpec | None = None) -> float:
    """Logistic solution chained across the parameter intervals."""
    _require_verhulst(model)
    if t < 0.0 or t > p.grid.maturity * (1.0 + 1e-12):
        raise GridError(f"time {t} lies outside [0, {p.grid.maturity}]")
    v = p.v0
    for i, (start, end) in enumerate(zip(p.grid.boundaries, p.grid.boundaries[1:])):
        if t <= start:
            break
        v = _logistic(v, p.values(i), min(t, end) - start)
    return v


def explicit_path(p: PiecewiseParams, grid: TimeGrid | None = None, model: ModelSpec | None = None) -> ZerothPath:
    _require_verhulst(model)
    grid = grid or refine_grid(p.grid)
    values = [v0_explicit_verhulst(p, t) for t in grid.boundaries]
    squares = [_explicit_square(p, a, b) for a, b in zip(grid.boundaries, grid.boundaries[1:])]
    return ZerothPath(grid, np.array(values), PathMethod.EXPLICIT, np.array(squares))


def _rk4_segment(model: ModelSpec, values: IntervalValues, v: float, length: float, n_steps: int) -> float:
    h = length / n_steps

    def f(x: float) -> float:
        return model.alpha(values, x)

    for _ in range(n_steps):
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        v += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(v):
            raise DivergenceError(f"RK4 diverged for model {model.name} with step {h}")
    return v


def _rk4_nodes(model: ModelSpec, p: PiecewiseParams, nodes: list[float], step: float) -> list[float]:
    if not step > 0.0:
        raise GridError(f"RK4 step must be positive, got {step}")
    result = [p.v0]
    v = p.v0
    for start, end in zip(nodes, nodes[1:]):
        values = p.at(start)
        n_steps = max(1, math.ceil((end - start) / step - 1e-9))
        v = _rk4_segment(model, values, v, end - start, n_steps)
        result.append(v)
    return result


def _merged_nodes(p: PiecewiseParams, upto: float) -> list[float]:
    nodes = [t for t in p.grid.boundaries if t < upto]
    if upto - nodes[-1] > 1e-15:
        nodes.append(upto)
    return nodes


def v0_rk4(model: ModelSpec, p: PiecewiseParams, t: float, step: float | None = None) -> float:
    """Fixed-step classical RK4; parameter interval boundaries are always nodes."""
    step = step or p.grid.maturity / DEFAULT_RK4_STEPS
    if t <= 0.0:
        return p.v0
    return _rk4_nodes(model, p, _merged_nodes(p, t), step)[-1]


def rk4_path(model: ModelSpec, p: PiecewiseParams, grid: TimeGrid | None = None,
             step: float | None = None) -> ZerothPath:
    grid = grid or refine_grid(p.grid)
    step = step or p.grid.maturity / DEFAULT_RK4_STEPS
    union = sorted(set(grid.boundaries) | {t for t in p.grid.boundaries if t <= grid.maturity})
    values = dict(zip(union, _rk4_nodes(model, p, union, step)))
    return ZerothPath(grid, np.array([values[t] for t in grid.boundaries]), PathMethod.RK4)


def v0_euler_piecewise(p: PiecewiseParams, fine_grid: TimeGrid, model: ModelSpec | None = None) -> ZerothPath:
    """One explicit Euler step per fine segment, linear in between."""
    model = model or verhulst()
    if not fine_grid.refines(p.grid):
        raise GridError("the fine grid does not refine the parameter grid")
    values = np.empty(len(fine_grid.boundaries))
    values[0] = p.v0
    for j, (start, length) in enumerate(zip(fine_grid.boundaries, fine_grid.deltas())):
        v = values[j]
        values[j + 1] = v + model.alpha(p.at(start), v) * length
    return ZerothPath(fine_grid, values, PathMethod.EULER_PW)


def zeroth_path(model: ModelSpec, p: PiecewiseParams, method: PathMethod,
                sub_steps: int = DEFAULT_SUB_STEPS) -> ZerothPath:
    grid = refine_grid(p.grid, sub_steps)
    logger.debug(f"Building {method.value} zeroth-order path on {grid.n_intervals} segments")
    if method is PathMethod.EULER_PW:
        return v0_euler_piecewise(p, grid, model)
    if method is PathMethod.EXPLICIT:
        return explicit_path(p, grid, model)
    return rk4_path(model, p, grid)
