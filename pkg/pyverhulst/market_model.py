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

"""Parameter, grid and model-definition types shared by the whole package.

All times are year fractions. Per-interval parameters are constant on the
right-open interval [T_i, T_{i+1}); the last interval also owns T_N.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple, TypedDict, Union

import numpy as np
import numpy.typing as npt

from .errors import ParameterError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

GRID_TOLERANCE = 1e-12

TENORS = {"W": 1.0 / 52.0, "M": 1.0 / 12.0, "Y": 1.0}


def parse_tenor(text: str | float) -> float:
    """'1M' -> 1/12, '6M' -> 0.5, '1Y' -> 1.0; numbers pass through."""
    if isinstance(text, (int, float)):
        return float(text)
    match = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([WMYwmy])\s*", text)
    if match is None:
        try:
            return float(text)
        except (TypeError, ValueError):
            raise ParameterError("tenor", f"expected a year fraction or a tenor like 3M, got {text!r}") from None
    return float(match.group(1)) * TENORS[match.group(2).upper()]


@dataclass(frozen=True)
class TimeGrid:
    boundaries: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(t) for t in self.boundaries)
        object.__setattr__(self, "boundaries", values)
        if len(values) < 2:
            raise ParameterError("grid", "needs at least two boundaries")
        if not all(math.isfinite(t) and t >= 0.0 for t in values):
            raise ParameterError("grid", "entries must be finite and non-negative")
        if values[0] != 0.0:
            raise ParameterError("grid", f"must start at 0, got {values[0]}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ParameterError("grid", "must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return len(self.boundaries) - 1

    @property
    def maturity(self) -> float:
        return self.boundaries[-1]

    @cached_property
    def _nodes(self) -> FloatArray:
        nodes = np.asarray(self.boundaries, dtype=np.float64)
        nodes.setflags(write=False)
        return nodes

    def as_array(self) -> FloatArray:
        return self._nodes

    def deltas(self) -> FloatArray:
        return np.diff(self.as_array())

    def interval_index(self, t: float) -> int:
        i = int(np.searchsorted(self.as_array(), t, side="right")) - 1
        return min(max(i, 0), self.n_intervals - 1)

    def node_index(self, t: float) -> int | None:
        for i, node in enumerate(self.boundaries):
            if abs(node - t) <= GRID_TOLERANCE * max(1.0, abs(t)):
                return i
        return None

    def contains(self, t: float) -> bool:
        return self.node_index(t) is not None

    def refines(self, other: TimeGrid) -> bool:
        return all(self.contains(t) for t in other.boundaries) and \
            abs(self.maturity - other.maturity) <= GRID_TOLERANCE

    def refined(self, sub_steps: int) -> TimeGrid:
        if sub_steps < 1:
            raise ParameterError("sub_steps", "must be at least 1")
        nodes = [0.0]
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            nodes.extend(a + (b - a) * j / sub_steps for j in range(1, sub_steps))
            nodes.append(b)
        return TimeGrid(tuple(nodes))

    def truncated(self, maturity: float) -> TimeGrid:
        index = self.node_index(maturity)
        if index is None or index == 0:
            raise ParameterError("maturity", f"{maturity} is not a positive grid boundary")
        return TimeGrid(self.boundaries[:index + 1])


class IntervalValues(NamedTuple):
    kappa: float
    theta: float
    lam: float
    rho: float
    r_d: float
    r_f: float


def _as_tuple(name: str, values: float | Sequence[float], n: int) -> tuple[float, ...]:
    if isinstance(values, (int, float)):
        return (float(values),) * n
    result = tuple(float(v) for v in values)
    if len(result) != n:
        raise ParameterError(name, f"expected {n} per-interval values, got {len(result)}")
    if not all(math.isfinite(v) for v in result):
        raise ParameterError(name, "values must be finite")
    return result


@dataclass(frozen=True)
class PiecewiseParams:
    grid: TimeGrid
    kappa: tuple[float, ...]
    theta: tuple[float, ...]
    lam: tuple[float, ...]
    rho: tuple[float, ...]
    r_d: tuple[float, ...]
    r_f: tuple[float, ...]
    s0: float
    v0: float
    # admits the deterministic limits lambda = 0 and kappa = 0
    degenerate_ok: bool = field(default=False, compare=False)

    def __post_init__(self):
        n = self.grid.n_intervals
        for name in ("kappa", "theta", "lam", "rho", "r_d", "r_f"):
            object.__setattr__(self, name, _as_tuple(name, getattr(self, name), n))
        for name in ("kappa", "theta", "lam"):
            values = getattr(self, name)
            zero_ok = self.degenerate_ok and name != "theta"
            if any(v < 0.0 for v in values) or (not zero_ok and any(v == 0.0 for v in values)):
                raise ParameterError(name, "must be positive on every interval")
        if any(abs(v) > 1.0 for v in self.rho):
            raise ParameterError("rho", "must lie in [-1, 1]")
        if not (math.isfinite(self.s0) and self.s0 > 0.0):
            raise ParameterError("s0", "spot must be positive")
        if not (math.isfinite(self.v0) and self.v0 > 0.0):
            raise ParameterError("v0", "initial volatility must be positive")

    @classmethod
    def flat(cls, maturity: float, s0: float, v0: float, kappa: float, theta: float, lam: float,
             rho: float, r_d: float = 0.0, r_f: float = 0.0, degenerate_ok: bool = False) -> PiecewiseParams:
        return cls(TimeGrid((0.0, maturity)), kappa, theta, lam, rho, r_d, r_f, s0, v0, degenerate_ok)

    @property
    def n_intervals(self) -> int:
        return self.grid.n_intervals

    @property
    def x0(self) -> float:
        return math.log(self.s0)

    def values(self, i: int) -> IntervalValues:
        return IntervalValues(self.kappa[i], self.theta[i], self.lam[i], self.rho[i], self.r_d[i], self.r_f[i])

    def interval_index(self, t: float) -> int:
        return self.grid.interval_index(t)

    def at(self, t: float) -> IntervalValues:
        return self.values(self.interval_index(t))

    def array(self, name: str) -> FloatArray:
        return np.asarray(getattr(self, name), dtype=np.float64)

    def integrated(self, name: str, maturity: float) -> float:
        nodes = self.grid.as_array()
        overlap = np.clip(np.minimum(nodes[1:], maturity) - nodes[:-1], 0.0, None)
        return float(np.dot(self.array(name), overlap))

    def integrated_rates(self, maturity: float) -> tuple[float, float]:
        return self.integrated("r_d", maturity), self.integrated("r_f", maturity)

    def with_node(self, t: float) -> PiecewiseParams:
        """Same parameters on a grid that also has a boundary at t."""
        if self.grid.contains(t):
            return self
        if not 0.0 < t < self.grid.maturity:
            raise ParameterError("maturity", f"{t} lies outside (0, {self.grid.maturity}]")
        i = self.interval_index(t)

        def split(values: tuple[float, ...]) -> tuple[float, ...]:
            return values[:i + 1] + values[i:]
        boundaries = self.grid.boundaries[:i + 1] + (t,) + self.grid.boundaries[i + 1:]
        return replace(self, grid=TimeGrid(boundaries), kappa=split(self.kappa), theta=split(self.theta),
                       lam=split(self.lam), rho=split(self.rho), r_d=split(self.r_d), r_f=split(self.r_f))

    def truncated(self, maturity: float) -> PiecewiseParams:
        grid = self.grid.truncated(maturity)
        n = grid.n_intervals
        return replace(self, grid=grid, kappa=self.kappa[:n], theta=self.theta[:n], lam=self.lam[:n],
                       rho=self.rho[:n], r_d=self.r_d[:n], r_f=self.r_f[:n])

    def refined(self, sub_steps: int) -> PiecewiseParams:
        def repeat(values: tuple[float, ...]) -> tuple[float, ...]:
            return tuple(v for v in values for _ in range(sub_steps))
        return replace(self, grid=self.grid.refined(sub_steps), kappa=repeat(self.kappa),
                       theta=repeat(self.theta), lam=repeat(self.lam), rho=repeat(self.rho),
                       r_d=repeat(self.r_d), r_f=repeat(self.r_f))

    def with_interval(self, i: int, kappa: float, theta: float, lam: float, rho: float) -> PiecewiseParams:
        def put(values: tuple[float, ...], value: float) -> tuple[float, ...]:
            return values[:i] + (float(value),) + values[i + 1:]
        return replace(self, kappa=put(self.kappa, kappa), theta=put(self.theta, theta),
                       lam=put(self.lam, lam), rho=put(self.rho, rho))

    def with_values(self, **changes: float) -> PiecewiseParams:
        """Replace a parameter on every interval, e.g. ``p.with_values(lam=0.5)``."""
        n = self.n_intervals
        updates: dict[str, Any] = {}
        for name, value in changes.items():
            updates[name] = value if name in ("s0", "v0") else (float(value),) * n
        return replace(self, **updates)

    def to_json_dict(self, model: str = "verhulst") -> ParamsTypedDict:
        return {
            "s0": self.s0,
            "v0": self.v0,
            "grid": list(self.grid.boundaries),
            "kappa": list(self.kappa),
            "theta": list(self.theta),
            "lambda": list(self.lam),
            "rho": list(self.rho),
            "r_d": list(self.r_d),
            "r_f": list(self.r_f),
            "model": model,
        }


# "lambda" is a keyword, hence the functional form
ParamsTypedDict = TypedDict("ParamsTypedDict", {
    "s0": float,
    "v0": float,
    "grid": list[float],
    "kappa": list[float],
    "theta": list[float],
    "lambda": list[float],
    "rho": list[float],
    "r_d": list[float],
    "r_f": list[float],
    "model": str,
})


class AffineStructure(NamedTuple):
    # alpha_x(t, v0) = k_const[i] + h[i] * v0 and alpha_xx(t, v0) = alpha_xx[i] on interval i
    k_const: FloatArray
    h: FloatArray
    alpha_xx: FloatArray


DriftFunction = Callable[[IntervalValues, float], float]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    alpha: DriftFunction
    alpha_x: DriftFunction
    alpha_xx: DriftFunction
    mu: float
    affine_structure: Callable[[PiecewiseParams], AffineStructure] | None = field(default=None, compare=False)
    martingale_margin_fn: Callable[[IntervalValues], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.5 <= self.mu <= 1.0:
            raise ParameterError("mu", f"diffusion exponent must lie in [1/2, 1], got {self.mu}")

    def drift(self, p: PiecewiseParams, t: float, x: float) -> float:
        return self.alpha(p.at(t), x)

    def drift_x(self, p: PiecewiseParams, t: float, x: float) -> float:
        return self.alpha_x(p.at(t), x)

    def drift_xx(self, p: PiecewiseParams, t: float, x: float) -> float:
        return self.alpha_xx(p.at(t), x)

    def diffusion(self, p: PiecewiseParams, t: float, x: float) -> float:
        return p.at(t).lam * max(x, 0.0) ** self.mu

    def martingale_margin(self, p: PiecewiseParams) -> tuple[float, ...]:
        if self.martingale_margin_fn is None:
            return tuple(0.0 for _ in range(p.n_intervals))
        return tuple(self.martingale_margin_fn(p.values(i)) for i in range(p.n_intervals))


def verhulst() -> ModelSpec:
    def affine(p: PiecewiseParams) -> AffineStructure:
        kappa, theta = p.array("kappa"), p.array("theta")
        return AffineStructure(kappa * theta, -2.0 * kappa, -2.0 * kappa)

    return ModelSpec(
        name="verhulst",
        alpha=lambda v, x: v.kappa * (v.theta - x) * x,
        alpha_x=lambda v, x: v.kappa * v.theta - 2.0 * v.kappa * x,
        alpha_xx=lambda v, x: -2.0 * v.kappa,
        mu=1.0,
        affine_structure=affine,
        martingale_margin_fn=lambda v: v.rho * v.lam - v.kappa,
    )


def mean_reverting_power(mu: float, name: str | None = None) -> ModelSpec:
    def affine(p: PiecewiseParams) -> AffineStructure:
        kappa = p.array("kappa")
        return AffineStructure(-kappa, np.zeros_like(kappa), np.zeros_like(kappa))

    return ModelSpec(
        name=name or f"mean_reverting_power_{mu:g}",
        alpha=lambda v, x: v.kappa * (v.theta - x),
        alpha_x=lambda v, x: -v.kappa,
        alpha_xx=lambda v, x: 0.0,
        mu=mu,
        affine_structure=affine,
        martingale_margin_fn=lambda v: v.rho * v.lam,
    )


def inverse_gamma() -> ModelSpec:
    return mean_reverting_power(1.0, name="inverse_gamma")


MODELS: dict[str, Callable[[], ModelSpec]] = {
    "verhulst": verhulst,
    "inverse_gamma": inverse_gamma,
}


def get_model(name: str, mu: float | None = None) -> ModelSpec:
    if name == "mean_reverting_power":
        if mu is None:
            raise ParameterError("mu", "mean_reverting_power needs a diffusion exponent")
        return mean_reverting_power(mu)
    try:
        return MODELS[name]()
    except KeyError:
        raise ParameterError("model", f"unknown model {name!r}, expected one of {sorted(MODELS)}") from None


class DeltaTag(Enum):
    PUT10 = "PUT10"
    PUT25 = "PUT25"
    ATM = "ATM"

    @property
    def delta(self) -> float | None:
        return {"PUT10": -0.10, "PUT25": -0.25, "ATM": None}[self.value]


@dataclass(frozen=True)
class OptionQuote:
    maturity: float
    implied_vol: float
    strike: float | None = None
    delta: DeltaTag | None = None
    weight: float = 1.0

    def __post_init__(self):
        if (self.strike is None) == (self.delta is None):
            raise ParameterError("quote", "exactly one of strike or delta tag must be given")
        if self.strike is not None and not self.strike > 0.0:
            raise ParameterError("strike", "must be positive")
        if not (math.isfinite(self.implied_vol) and self.implied_vol > 0.0):
            raise ParameterError("implied_vol", "must be positive")
        if not self.maturity > 0.0:
            raise ParameterError("maturity", "must be positive")
        if not self.weight >= 0.0:
            raise ParameterError("weight", "must be non-negative")

    def check_against(self, grid: TimeGrid):
        if not grid.contains(self.maturity):
            raise ParameterError("maturity", f"{self.maturity} is not a grid boundary")


class MartingaleReport(NamedTuple):
    ok: bool
    margins: tuple[float, ...]


def check_martingale_condition(p: PiecewiseParams, model: ModelSpec | None = None) -> MartingaleReport:
    """Per-interval margin of the risk-neutral condition; the measure is a
    domestic risk-neutral one when every margin is <= 0 (rho*lambda - kappa
    for the Verhulst model)."""
    model = model or verhulst()
    margins = model.martingale_margin(p)
    ok = all(m <= 0.0 for m in margins)
    if not ok:
        logger.warning(f"Martingale condition violated on intervals "
                       f"{[i for i, m in enumerate(margins) if m > 0.0]}")
    return MartingaleReport(ok, margins)


ParamsSource = Union[str, Path, Mapping[str, Any]]

REQUIRED_FIELDS = ("s0", "v0", "grid", "kappa", "theta", "lambda", "rho", "r_d", "r_f")


def load_params(source: ParamsSource) -> tuple[PiecewiseParams, ModelSpec]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as f:
            document = json.load(f)
    else:
        document = dict(source)
    for name in REQUIRED_FIELDS:
        if name not in document:
            raise ParameterError(name, "missing field")
    try:
        grid = TimeGrid(tuple(parse_tenor(t) for t in document["grid"]))
    except ParameterError:
        raise
    except (TypeError, ValueError) as e:
        raise ParameterError("grid", str(e)) from None
    model = get_model(document.get("model", "verhulst"), document.get("mu"))
    # the deterministic limits lambda = 0 and kappa = 0 are valid configurations
    try:
        params = PiecewiseParams(
            grid=grid,
            kappa=document["kappa"],
            theta=document["theta"],
            lam=document["lambda"],
            rho=document["rho"],
            r_d=document["r_d"],
            r_f=document["r_f"],
            s0=float(document["s0"]),
            v0=float(document["v0"]),
            degenerate_ok=True,
        )
    except ParameterError:
        raise
    except (TypeError, ValueError) as e:
        raise ParameterError("params", f"non-numeric value: {e}") from None
    return params, model
