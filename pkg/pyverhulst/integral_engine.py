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

"""Iterated integral operators.

    omega^{(k, l)}_{t,T} = int_t^T l_u exp(int_0^u k_z dz) du

and the n-fold operator nests the remaining factors inside the integrand,
the first factor being the outermost one and therefore the earliest time.
The value of an n-fold operator on [0, T] is an integral over the ordered
simplex 0 < u_1 < ... < u_n < T, so the operators built from the leading
factors of a term ("partial operators") are all that is needed to move the
right end from T_i to T_{i+1}.

Two evaluators are provided: an adaptive Runge-Kutta quadrature of the
forward Volterra form for arbitrary integrands, and the closed-form
recursion for piecewise data on an Euler-linear zeroth-order path.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import GridError, ParameterError, QuadratureAccuracyError
from .market_model import GRID_TOLERANCE, FloatArray, TimeGrid
from .zeroth_order import PathMethod, ZerothPath

logger = logging.getLogger(__name__)

MAX_FOLD = 4
PHI_ZERO_THRESHOLD = 1e-12
# largest |k dT| handled by the Taylor evaluation of a segment
SERIES_LIMIT = 2.0
SERIES_EPS = 1e-18


@dataclass(frozen=True)
class OperatorFactor:
    """One factor (k_const + h v0, l_const v0^q) with per-interval constants."""
    k_const: tuple[float, ...]
    h: tuple[float, ...]
    l_const: tuple[float, ...]
    q: int = 0

    def __post_init__(self):
        for name in ("k_const", "h", "l_const"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not len(self.k_const) == len(self.h) == len(self.l_const):
            raise ParameterError("factor", "k_const, h and l_const must have the same length")
        if int(self.q) != self.q or self.q < 0:
            raise ParameterError("q", f"power of v0 must be a non-negative integer, got {self.q}")
        object.__setattr__(self, "q", int(self.q))

    def k_tilde(self, i: int, v: float) -> float:
        return self.k_const[i] + self.h[i] * v

    def weight(self, i: int, v: float, dv: float) -> FloatArray:
        """Coefficients in gamma of l_const (v + dv gamma)^q."""
        return self.l_const[i] * np.array([math.comb(self.q, p) * v ** (self.q - p) * dv ** p
                                           for p in range(self.q + 1)])


@dataclass(frozen=True)
class OperatorTerm:
    grid: TimeGrid
    factors: tuple[OperatorFactor, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not 1 <= len(self.factors) <= MAX_FOLD:
            raise ParameterError("factors", f"operators have 1 to {MAX_FOLD} factors, got {len(self.factors)}")
        for f in self.factors:
            if len(f.k_const) != self.grid.n_intervals:
                raise ParameterError("factors", f"factor has {len(f.k_const)} intervals, "
                                                f"grid has {self.grid.n_intervals}")

    @property
    def n(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class OperatorState:
    """Partial operators omega_{0,t} of the leading 0..n factors at time t.

    prefix[0] is the empty operator (1). log_e and log_ev hold the running
    exponents int_0^t k_const and int_0^t h v0 of each factor.
    """
    time: float
    node: int
    prefix: tuple[float, ...]
    log_e: tuple[float, ...]
    log_ev: tuple[float, ...]
    value_at: dict[int, tuple[float, ...]] = field(default_factory=dict, compare=False)

    @property
    def value(self) -> float:
        return self.prefix[-1]

    @property
    def e(self) -> tuple[float, ...]:
        return tuple(math.exp(v) for v in self.log_e)

    @property
    def e_v(self) -> tuple[float, ...]:
        return tuple(math.exp(v) for v in self.log_ev)


def new_state(term: OperatorTerm) -> OperatorState:
    prefix = (1.0,) + (0.0,) * term.n
    zeros = (0.0,) * term.n
    return OperatorState(0.0, 0, prefix, zeros, zeros, {0: prefix})


def phi(k: float, p: int, dt: float, gamma: float) -> float:
    """int over [T_i + gamma dT, T_{i+1}] of exp(k (u - T_i)) ((u - T_i)/dT)^p du."""
    return _phi((float(k),), (int(p),), float(dt), float(gamma))


def phi_n(ks: Sequence[float], ps: Sequence[int], dt: float, gamma: float) -> float:
    """n-fold version of phi on one interval, factors listed outermost first."""
    if len(ks) != len(ps) or not ks:
        raise ParameterError("ps", "needs one power per exponent")
    return _phi(tuple(float(k) for k in ks), tuple(int(p) for p in ps), float(dt), float(gamma))


@lru_cache(maxsize=65536)
def _phi(ks: tuple[float, ...], ps: tuple[int, ...], dt: float, gamma: float) -> float:
    if not dt > 0.0:
        raise ParameterError("dt", f"interval length must be positive, got {dt}")
    k, p = ks[0], ps[0]
    if gamma >= 1.0:
        return 0.0
    if len(ks) == 1:
        if abs(k) < PHI_ZERO_THRESHOLD:
            return dt * (1.0 - gamma ** (p + 1)) / (p + 1)
        value = math.exp(k * dt) - gamma ** p * math.exp(k * dt * gamma)
        if p >= 1:
            value -= p / dt * _phi(ks, (p - 1,), dt, gamma)
        return value / k
    rest = _phi(ks[1:], ps[1:], dt, gamma)
    if abs(k) < PHI_ZERO_THRESHOLD:
        logger.debug(f"phi: zero branch for k={k!r}")
        merged = _phi(ks[1:], (p + ps[1] + 1,) + ps[2:], dt, gamma)
        return dt / (p + 1) * (merged - gamma ** (p + 1) * rest)
    merged = _phi((k + ks[1],) + ks[2:], (p + ps[1],) + ps[2:], dt, gamma)
    value = merged - gamma ** p * math.exp(k * dt * gamma) * rest
    if p >= 1:
        value -= p / dt * _phi(ks, (p - 1,) + ps[1:], dt, gamma)
    return value / k


def _series_degree(scaled: float, base: int) -> int:
    degree, term = 0, 1.0
    while term > SERIES_EPS:
        degree += 1
        term *= scaled / degree
    return base + degree


def _series_chain(ks: Sequence[float], weights: Sequence[FloatArray], dt: float) -> list[float]:
    """Ordered segment integrals of the chains weights[0..m] for every m.

    Each integrand exp(k s) w(s / dT) is expanded as a polynomial in s / dT
    and the simplex integral is accumulated from the earliest factor onward.
    """
    scaled = max(abs(k) * dt for k in ks)
    degree = _series_degree(scaled, sum(len(w) for w in weights))
    powers = np.arange(degree + 1)
    factorials = np.cumprod(np.concatenate(([1.0], powers[1:].astype(np.float64))))
    acc = np.array([1.0])
    result = []
    for k, w in zip(ks, weights):
        exp_series = (k * dt) ** powers / factorials
        integrand = np.convolve(np.convolve(acc, w), exp_series)[:degree + 1]
        acc = np.concatenate(([0.0], integrand / (powers[:len(integrand)] + 1.0))) * dt
        result.append(float(acc.sum()))
    return result


def _closed_form_chain(ks: Sequence[float], weights: Sequence[FloatArray], dt: float) -> list[float]:
    result = []
    for m in range(1, len(ks) + 1):
        total = 0.0
        for ps in np.ndindex(*(len(w) for w in weights[:m])):
            coefficient = math.prod(w[p] for w, p in zip(weights, ps))
            if coefficient != 0.0:
                total += coefficient * phi_n(ks[:m], ps, dt, 0.0)
        result.append(total)
    return result


def segment_increments(ks: Sequence[float], weights: Sequence[FloatArray], dt: float) -> dict[tuple[int, int], float]:
    """Integrals of every contiguous chain a..b of factors over one segment,
    without the running exponentials at the segment start."""
    increments = {}
    for a in range(len(ks)):
        if max(abs(k) * dt for k in ks[a:]) <= SERIES_LIMIT:
            values = _series_chain(ks[a:], weights[a:], dt)
        else:
            values = _closed_form_chain(ks[a:], weights[a:], dt)
        for offset, value in enumerate(values):
            increments[(a, a + offset)] = value
    return increments


def extend_segment(state: OperatorState, term: OperatorTerm, i: int, v: float, dv: float, dt: float) -> OperatorState:
    """Moves the state across one segment of length dt inside parameter interval i,
    on which v0 runs linearly from v to v + dv."""
    ks = [f.k_tilde(i, v) for f in term.factors]
    weights = [f.weight(i, v, dv) for f in term.factors]
    increments = segment_increments(ks, weights, dt)
    running = [le + lv for le, lv in zip(state.log_e, state.log_ev)]
    prefix = [1.0]
    for j in range(1, term.n + 1):
        total = state.prefix[j]
        for a in range(j):
            scale = math.exp(math.fsum(running[a:j]))
            total += state.prefix[a] * increments[(a, j - 1)] * scale
        prefix.append(total)
    log_e = tuple(le + f.k_const[i] * dt for le, f in zip(state.log_e, term.factors))
    log_ev = tuple(lv + f.h[i] * v * dt for lv, f in zip(state.log_ev, term.factors))
    return OperatorState(state.time + dt, state.node + 1, tuple(prefix), log_e, log_ev, state.value_at)


def extend_to_next_maturity(state: OperatorState, term: OperatorTerm, i: int, zeroth: ZerothPath) -> OperatorState:
    """Extends a state complete through T_i to T_{i+1} along the Euler-linear path."""
    grid = term.grid
    if not 0 <= i < grid.n_intervals:
        raise GridError(f"interval {i} outside the parameter grid")
    start, end = grid.boundaries[i], grid.boundaries[i + 1]
    if abs(state.time - start) > GRID_TOLERANCE * max(1.0, start):
        raise GridError(f"state is at t={state.time}, expected T_{i}={start}")
    if zeroth.method is not PathMethod.EULER_PW:
        raise GridError("the recursion needs the piecewise Euler zeroth-order path")
    first, last = zeroth.grid.node_index(start), zeroth.grid.node_index(end)
    if first is None or last is None or first != state.node:
        raise GridError("the zeroth-order grid does not refine the operator grid")
    for j in range(first, last):
        v, dv, dt = zeroth.segment(j)
        state = extend_segment(state, term, i, v, dv, dt)
    # snap to the grid node so round-off in the running time does not accumulate
    values = dict(state.value_at)
    values[i + 1] = state.prefix
    return OperatorState(end, last, state.prefix, state.log_e, state.log_ev, values)


def eval_recursion(term: OperatorTerm, zeroth: ZerothPath, maturity: float | None = None) -> OperatorState:
    maturity = term.grid.maturity if maturity is None else maturity
    last = term.grid.node_index(maturity)
    if last is None:
        raise GridError(f"maturity {maturity} is not a node of the operator grid")
    state = new_state(term)
    for i in range(last):
        state = extend_to_next_maturity(state, term, i, zeroth)
    return state


ScalarFunction = Callable[[float], float]


@dataclass(frozen=True)
class FunctionFactor:
    k: ScalarFunction
    l: ScalarFunction


def _segments(t0: float, maturity: float, breakpoints: Sequence[float]) -> list[tuple[float, float]]:
    inner = sorted(b for b in breakpoints if t0 < b < maturity)
    nodes = [t0] + [b for b in inner if b - t0 > 1e-15] + [maturity]
    return [(a, b) for a, b in zip(nodes, nodes[1:]) if b > a]


def eval_quadrature_batch(terms: Sequence[Sequence[FunctionFactor]], t0: float, maturity: float,
                          tol: float = 1e-12, breakpoints: Sequence[float] = ()) -> list[FloatArray]:
    """Partial operators omega_{t0,T} of several terms from one adaptive solve.

    The state carries log E_j = int_0^t k_j and Psi_J, with
    Psi_J' = l_J E_J Psi_{J-1}; piecewise integrands are evaluated as
    left-continuous on every segment between breakpoints.
    """
    if not tol > 0.0:
        raise ParameterError("tol", "must be positive")
    if maturity < t0:
        raise GridError(f"empty integration range [{t0}, {maturity}]")
    factors = [f for term in terms for f in term]
    sizes = [len(term) for term in terms]
    offsets = np.cumsum([0] + sizes)
    n = len(factors)
    y = np.zeros(2 * n)
    rtol = max(tol, 1e-13)

    def solve(a: float, b: float, y0: FloatArray, with_weights: bool) -> FloatArray:
        inside = np.nextafter(b, a)

        def rhs(t: float, state: FloatArray) -> FloatArray:
            s = min(t, inside)
            out = np.zeros_like(state)
            out[:n] = [f.k(s) for f in factors]
            if with_weights:
                for term_index, size in enumerate(sizes):
                    base = offsets[term_index]
                    previous = 1.0
                    for j in range(size):
                        out[n + base + j] = factors[base + j].l(s) * math.exp(state[base + j]) * previous
                        previous = state[n + base + j]
            return out

        solution = solve_ivp(rhs, (a, b), y0, method="DOP853", rtol=rtol, atol=tol * 1e-2)
        if not solution.success:
            best = float(solution.y[-1, -1]) if solution.y.size else float("nan")
            raise QuadratureAccuracyError(f"adaptive quadrature failed on [{a}, {b}]: {solution.message}", best)
        return solution.y[:, -1]

    for a, b in _segments(0.0, t0, breakpoints) if t0 > 0.0 else []:
        y = solve(a, b, y, with_weights=False)
    for a, b in _segments(t0, maturity, breakpoints):
        y = solve(a, b, y, with_weights=True)
    return [y[n + offsets[m]:n + offsets[m + 1]].copy() for m in range(len(terms))]


def eval_quadrature(term: Sequence[FunctionFactor], t0: float, maturity: float, tol: float = 1e-12,
                    breakpoints: Sequence[float] = ()) -> float:
    return float(eval_quadrature_batch([term], t0, maturity, tol, breakpoints)[0][-1])


def term_functions(term: OperatorTerm, zeroth: ZerothPath) -> list[FunctionFactor]:
    """Integrands of a piecewise term along a zeroth-order path.

    On the Euler path the exponent uses the left fine-node value of v0 and
    the weight the linear path, which is the data the recursion integrates.
    """
    grid = term.grid
    frozen = zeroth.method is PathMethod.EULER_PW

    def make(f: OperatorFactor) -> FunctionFactor:
        def k(t: float) -> float:
            v = zeroth.node_value_at(t) if frozen else float(zeroth.value_at(t))
            return f.k_tilde(grid.interval_index(t), v)

        def l(t: float) -> float:
            return f.l_const[grid.interval_index(t)] * float(zeroth.value_at(t)) ** f.q

        return FunctionFactor(k, l)

    return [make(f) for f in term.factors]


def quadrature_breakpoints(term: OperatorTerm, zeroth: ZerothPath) -> tuple[float, ...]:
    if zeroth.method is PathMethod.EULER_PW:
        return tuple(sorted(set(zeroth.grid.boundaries) | set(term.grid.boundaries)))
    return term.grid.boundaries
