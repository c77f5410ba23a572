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

"""Monte Carlo reference prices.

Paths are simulated in fixed blocks. Block b draws its normals from a Philox
generator keyed by (seed, b), step by step, with the antithetic half of the
block mirroring the first half. A block is therefore reproducible on its own
and estimates do not depend on how many workers run the blocks.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import blackscholes as bs
from .errors import ParameterError
from .market_model import MODELS, FloatArray, ModelSpec, PiecewiseParams, get_model, verhulst

logger = logging.getLogger(__name__)


class Estimator(Enum):
    PLAIN = "plain"
    MIXING = "mixing"


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    steps_per_year: int = 1000
    seed: int = 0
    estimator: Estimator = Estimator.MIXING
    antithetic: bool = True
    block_size: int = 4096
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 2:
            raise ParameterError("n_paths", "needs at least two paths")
        if self.steps_per_year < 1:
            raise ParameterError("steps_per_year", "must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed", "must be a 64-bit unsigned integer")
        if self.block_size < 2:
            raise ParameterError("block_size", "must be at least 2")
        if self.antithetic and (self.n_paths % 2 or self.block_size % 2):
            raise ParameterError("n_paths", "antithetic sampling needs an even path count and block size")
        if self.workers < 1:
            raise ParameterError("workers", "must be at least 1")

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // self.block_size)

    def block_paths(self, block: int) -> int:
        return min(self.block_size, self.n_paths - block * self.block_size)


class McEstimate(NamedTuple):
    mean: float
    std_error: float
    n_paths: int

    def interval(self, width: float = 3.0) -> tuple[float, float]:
        return self.mean - width * self.std_error, self.mean + width * self.std_error


def step_times(p: PiecewiseParams, maturity: float, steps_per_year: int) -> FloatArray:
    """Simulation times; every parameter boundary below the maturity is a node."""
    nodes = [t for t in p.grid.boundaries if t < maturity] + [maturity]
    times = [0.0]
    for a, b in zip(nodes, nodes[1:]):
        n = max(1, math.ceil((b - a) * steps_per_year - 1e-9))
        times.extend(a + (b - a) * j / n for j in range(1, n))
        times.append(b)
    return np.array(times)


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed + (block << 64)))


class PathStatistics(NamedTuple):
    """Per-path quantities from which every strike is priced."""
    x_mixing: FloatArray
    y_mixing: FloatArray
    x_terminal: FloatArray
    volatility: FloatArray | None = None


class _BlockTask(NamedTuple):
    params: PiecewiseParams
    model_key: tuple[str, float | None] | None
    maturity: float
    config: McConfig
    block: int
    keep_paths: bool


def _normals(rng: np.random.Generator, n: int, antithetic: bool) -> FloatArray:
    if not antithetic:
        return rng.standard_normal(n)
    half = rng.standard_normal(n // 2)
    return np.concatenate((half, -half))


def _simulate_block(p: PiecewiseParams, model: ModelSpec | None, maturity: float, cfg: McConfig,
                    block: int, keep_paths: bool = False) -> PathStatistics:
    """One block of (V, X) paths; ``model=None`` selects the exact verhulst solution."""
    n = cfg.block_paths(block)
    rng = block_generator(cfg.seed, block)
    times = step_times(p, maturity, cfg.steps_per_year)
    x0 = p.x0
    v = np.full(n, p.v0)
    x = np.full(n, x0)
    # exact verhulst state: log F and the trapezoid of int kappa F du
    log_f = np.zeros(n)
    f_integral = np.zeros(n)
    int_rho2_v2 = np.zeros(n)
    int_rho_v_db = np.zeros(n)
    int_one_minus_rho2_v2 = np.zeros(n)
    paths = [v.copy()] if keep_paths else None
    for start, end in zip(times[:-1], times[1:]):
        values = p.at(start)
        dt = end - start
        sqrt_dt = math.sqrt(dt)
        db = _normals(rng, n, cfg.antithetic) * sqrt_dt
        dz = _normals(rng, n, cfg.antithetic) * sqrt_dt
        rho, lam = values.rho, values.lam
        v_left = v
        if model is None:
            f_left = np.exp(log_f)
            log_f = log_f + (values.kappa * values.theta - 0.5 * lam * lam) * dt + lam * db
            f_right = np.exp(log_f)
            f_integral = f_integral + values.kappa * 0.5 * (f_left + f_right) * dt
            v = f_right / (1.0 / p.v0 + f_integral)
        else:
            v_plus = np.maximum(v, 0.0)
            drift = _vector_drift(model, values, v_plus)
            v = v + drift * dt + lam * v_plus ** model.mu * db
        # left point throughout, so exp(x_mixing) stays a martingale step by step
        v_left_plus = np.maximum(v_left, 0.0)
        square = v_left_plus ** 2 * dt
        int_rho2_v2 += rho * rho * square
        int_one_minus_rho2_v2 += (1.0 - rho * rho) * square
        int_rho_v_db += rho * v_left_plus * db
        x = x + (values.r_d - values.r_f - 0.5 * v_left_plus ** 2) * dt \
            + v_left_plus * (rho * db + math.sqrt(max(1.0 - rho * rho, 0.0)) * dz)
        if keep_paths:
            paths.append(v.copy())
    x_mixing = x0 - 0.5 * int_rho2_v2 + int_rho_v_db
    volatility = np.stack(paths, axis=1) if keep_paths else None
    return PathStatistics(x_mixing, int_one_minus_rho2_v2, x, volatility)


def _vector_drift(model: ModelSpec, values, v: FloatArray) -> FloatArray:
    # built-in drifts are polynomial in x and broadcast over arrays
    return np.asarray(model.alpha(values, v), dtype=np.float64) * np.ones_like(v)


def _model_key(model: ModelSpec | None) -> tuple[str, float | None] | None:
    if model is None:
        return None
    if model.name in MODELS:
        return model.name, None
    if model.name.startswith("mean_reverting_power"):
        return "mean_reverting_power", model.mu
    raise ParameterError("model", f"model {model.name} is not registered and cannot be sent to workers")


def _run_block(task: _BlockTask) -> PathStatistics:
    model = None if task.model_key is None else get_model(*task.model_key)
    return _simulate_block(task.params, model, task.maturity, task.config, task.block, task.keep_paths)


def _prepare(p: PiecewiseParams, model: ModelSpec | None, maturity: float) -> tuple[PiecewiseParams, ModelSpec | None]:
    if not 0.0 < maturity <= p.grid.maturity * (1.0 + 1e-12):
        raise ParameterError("maturity", f"{maturity} lies outside (0, {p.grid.maturity}]")
    if model is not None and model.name == "verhulst":
        model = None
    return p.with_node(min(maturity, p.grid.maturity)), model


def simulate(p: PiecewiseParams, maturity: float, cfg: McConfig, model: ModelSpec | None = None) -> PathStatistics:
    """Per-path statistics of all blocks, concatenated in block order."""
    p, model = _prepare(p, model, maturity)
    if cfg.workers > 1 and cfg.n_blocks > 1:
        tasks = [_BlockTask(p, _model_key(model), maturity, cfg, b, False) for b in range(cfg.n_blocks)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            blocks = list(executor.map(_run_block, tasks))
    else:
        blocks = [_simulate_block(p, model, maturity, cfg, b) for b in range(cfg.n_blocks)]
    logger.info(f"Simulated {cfg.n_paths} paths in {cfg.n_blocks} blocks to T={maturity}")
    return PathStatistics(*(np.concatenate([getattr(b, name) for b in blocks])
                            for name in ("x_mixing", "y_mixing", "x_terminal")))


def simulate_verhulst_exact(p: PiecewiseParams, cfg: McConfig, path_index: int,
                            maturity: float | None = None) -> tuple[FloatArray, FloatArray]:
    """(times, V) of one path of the explicit verhulst solution."""
    maturity = p.grid.maturity if maturity is None else maturity
    if not 0 <= path_index < cfg.n_paths:
        raise ParameterError("path_index", f"must lie in [0, {cfg.n_paths})")
    block, offset = divmod(path_index, cfg.block_size)
    cut, _ = _prepare(p, None, maturity)
    stats = _simulate_block(cut, None, maturity, cfg, block, keep_paths=True)
    return step_times(cut, maturity, cfg.steps_per_year), stats.volatility[offset]


def simulate_euler(model: ModelSpec, p: PiecewiseParams, cfg: McConfig, path_index: int,
                   maturity: float | None = None) -> tuple[FloatArray, FloatArray]:
    """(times, V) of one Euler path with full truncation."""
    maturity = p.grid.maturity if maturity is None else maturity
    if not 0 <= path_index < cfg.n_paths:
        raise ParameterError("path_index", f"must lie in [0, {cfg.n_paths})")
    block, offset = divmod(path_index, cfg.block_size)
    cut = p.with_node(min(maturity, p.grid.maturity))
    stats = _simulate_block(cut, model, maturity, cfg, block, keep_paths=True)
    return step_times(cut, maturity, cfg.steps_per_year), stats.volatility[offset]


def _estimate(samples: FloatArray, antithetic: bool) -> McEstimate:
    n = samples.size
    mean = math.fsum(samples) / n
    if antithetic:
        half = n // 2
        samples = 0.5 * (samples[:half] + samples[half:]) if n % 2 == 0 else samples
    if np.all(samples == samples[0]):
        return McEstimate(mean, 0.0, n)
    return McEstimate(mean, float(np.std(samples, ddof=1) / math.sqrt(samples.size)), n)


def _pair_up(samples: FloatArray, cfg: McConfig) -> FloatArray:
    # antithetic partners sit in the two halves of every block
    if not cfg.antithetic:
        return samples
    firsts, seconds = [], []
    for b in range(cfg.n_blocks):
        start, n = b * cfg.block_size, cfg.block_paths(b)
        firsts.append(samples[start:start + n // 2])
        seconds.append(samples[start + n // 2:start + n])
    return np.concatenate(firsts + seconds)


def _strikes(k: float | Sequence[float]) -> list[float]:
    return [float(k)] if isinstance(k, (int, float)) else [float(v) for v in k]


def estimate_from_statistics(stats: PathStatistics, p: PiecewiseParams, k: float, maturity: float,
                             cfg: McConfig, estimator: Estimator) -> McEstimate:
    int_rd, int_rf = p.integrated_rates(maturity)
    if estimator is Estimator.MIXING:
        samples = bs.put_values(stats.x_mixing, stats.y_mixing, k, int_rd, int_rf)
    else:
        samples = math.exp(-int_rd) * np.maximum(math.exp(k) - np.exp(stats.x_terminal), 0.0)
    return _estimate(_pair_up(samples, cfg), cfg.antithetic)


def _price(p: PiecewiseParams, k: float | Sequence[float], maturity: float, cfg: McConfig,
           model: ModelSpec | None, estimator: Estimator) -> McEstimate | list[McEstimate]:
    stats = simulate(p, maturity, cfg, model)
    results = [estimate_from_statistics(stats, p, s, maturity, cfg, estimator) for s in _strikes(k)]
    return results[0] if isinstance(k, (int, float)) else results


def price_mixing_mc(p: PiecewiseParams, k: float | Sequence[float], maturity: float, cfg: McConfig,
                    model: ModelSpec | None = None) -> McEstimate | list[McEstimate]:
    """Average over paths of P_BS(x0 - int rho^2 V^2 / 2 + int rho V dB, int (1 - rho^2) V^2)."""
    return _price(p, k, maturity, cfg, model or verhulst(), Estimator.MIXING)


def price_plain_mc(p: PiecewiseParams, k: float | Sequence[float], maturity: float, cfg: McConfig,
                   model: ModelSpec | None = None) -> McEstimate | list[McEstimate]:
    """Discounted average payoff of the Euler log-spot."""
    return _price(p, k, maturity, cfg, model or verhulst(), Estimator.PLAIN)


def price_mc(p: PiecewiseParams, k: float | Sequence[float], maturity: float, cfg: McConfig,
             model: ModelSpec | None = None) -> McEstimate | list[McEstimate]:
    return _price(p, k, maturity, cfg, model or verhulst(), cfg.estimator)


def martingale_ratio(p: PiecewiseParams, maturity: float, cfg: McConfig, model: ModelSpec | None = None) -> McEstimate:
    """E[exp(-int (r_d - r_f)) S_T] / S_0, which is 1 under a risk-neutral measure."""
    stats = simulate(p, maturity, cfg, model or verhulst())
    if cfg.estimator is Estimator.MIXING:
        samples = np.exp(stats.x_mixing - p.x0)
    else:
        int_rd, int_rf = p.integrated_rates(maturity)
        samples = np.exp(stats.x_terminal - p.x0 - (int_rd - int_rf))
    return _estimate(_pair_up(samples, cfg), cfg.antithetic)
