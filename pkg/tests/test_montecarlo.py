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

import numpy as np
import pytest

from pyverhulst import blackscholes as bs
from pyverhulst.errors import ParameterError
from pyverhulst.impliedvol import implied_vol, vega
from pyverhulst.market_model import PiecewiseParams, inverse_gamma, verhulst
from pyverhulst.montecarlo import (Estimator, McConfig, _simulate_block, block_generator, martingale_ratio, price_mc,
                                   price_mixing_mc, price_plain_mc, simulate, simulate_euler, simulate_verhulst_exact,
                                   step_times)
from pyverhulst.pricer import Backend, price_second_order_general, price_second_order_verhulst
from pyverhulst.zeroth_order import v0_explicit_verhulst

SMALL = McConfig(n_paths=4096, steps_per_year=250, seed=42, block_size=1024)


def deterministic_params(**kwargs) -> PiecewiseParams:
    values = dict(s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=0.0, rho=0.0, r_d=0.02, degenerate_ok=True)
    values.update(kwargs)
    return PiecewiseParams.flat(0.5, **values)


def test_config_validation():
    with pytest.raises(ParameterError):
        McConfig(n_paths=1)
    with pytest.raises(ParameterError):
        McConfig(n_paths=1001)
    with pytest.raises(ParameterError):
        McConfig(seed=-1)
    assert McConfig(n_paths=1001, antithetic=False, block_size=500).n_blocks == 3
    assert McConfig(n_paths=1000, block_size=400).block_paths(2) == 200


def test_step_times_hit_parameter_boundaries(piecewise_params):
    times = step_times(piecewise_params, 0.3, 100)
    assert times[0] == 0.0 and times[-1] == 0.3
    for node in (1.0 / 12.0, 0.25):
        assert np.any(np.isclose(times, node, rtol=0.0, atol=1e-15))
    assert np.all(np.diff(times) <= 0.01 + 1e-12)


def test_block_generator_is_counter_based():
    a = block_generator(7, 3).standard_normal(5)
    assert np.array_equal(a, block_generator(7, 3).standard_normal(5))
    assert not np.array_equal(a, block_generator(7, 4).standard_normal(5))
    assert not np.array_equal(a, block_generator(8, 3).standard_normal(5))


def test_zero_vol_of_vol_mixing_is_exact():
    p = deterministic_params()
    k = math.log(100.0)
    estimate = price_mixing_mc(p, k, 0.5, SMALL)
    assert estimate.std_error == 0.0
    assert estimate.n_paths == SMALL.n_paths
    # every path carries the same left-point sum of v^2 dt
    times, path = simulate_verhulst_exact(p, SMALL, 0)
    y = float(np.sum(path[:-1] ** 2 * np.diff(times)))
    int_rd, _ = p.integrated_rates(0.5)
    assert estimate.mean == pytest.approx(bs.put_price(bs.BsPoint(p.x0, y, k, int_rd)), rel=1e-12)
    expected = price_second_order_verhulst(p, k, 0.5, Backend.QUADRATURE).total
    assert estimate.mean == pytest.approx(expected, rel=2e-3)
    plain = price_plain_mc(p, k, 0.5, SMALL)
    assert abs(plain.mean - estimate.mean) < 4.0 * plain.std_error


@pytest.mark.parametrize("rho,random", [(0.0, False), (-0.6, True)])
def test_zero_vol_of_vol_mixing_error(rho, random):
    # with lambda = 0 only int rho v dB is left random
    estimate = price_mixing_mc(deterministic_params(rho=rho), math.log(100.0), 0.5, SMALL)
    assert (estimate.std_error > 0.0) is random


def test_zero_vol_of_vol_path_is_logistic():
    p = deterministic_params()
    times, path = simulate_verhulst_exact(p, SMALL, 5)
    expected = np.array([v0_explicit_verhulst(p, t) for t in times])
    assert np.allclose(path, expected, rtol=1e-5)


def test_frozen_variance_pays_forward_intrinsic():
    # v stays at v0 when kappa = lambda = 0; a tiny v0 leaves the discounted forward intrinsic
    p = deterministic_params(kappa=0.0, v0=1e-9, theta=0.15)
    k = math.log(105.0)
    expected = 105.0 * math.exp(-0.01) - 100.0
    plain = price_plain_mc(p, k, 0.5, SMALL)
    mixing = price_mixing_mc(p, k, 0.5, SMALL)
    assert plain.mean == pytest.approx(expected, rel=1e-6)
    assert mixing.mean == pytest.approx(expected, rel=1e-6)


def test_reproducible_for_seed_and_workers(safe_params):
    k = math.log(100.0)
    single = price_mc(safe_params, k, 0.25, SMALL)
    again = price_mc(safe_params, k, 0.25, SMALL)
    parallel = price_mc(safe_params, k, 0.25, McConfig(n_paths=4096, steps_per_year=250, seed=42, block_size=1024,
                                                       workers=2))
    other_seed = price_mc(safe_params, k, 0.25, McConfig(n_paths=4096, steps_per_year=250, seed=43, block_size=1024))
    assert single == again
    assert single.mean == parallel.mean and single.std_error == parallel.std_error
    assert single.mean != other_seed.mean


def test_exact_path_stays_positive():
    p = PiecewiseParams.flat(1.0, s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=3.0, rho=-0.7)
    cfg = McConfig(n_paths=10_000, steps_per_year=100, seed=1, block_size=10_000)
    paths = _simulate_block(p, None, 1.0, cfg, 0, keep_paths=True).volatility
    assert paths.shape == (10_000, 101)
    assert np.all(paths > 0.0)
    with pytest.raises(ParameterError):
        simulate_verhulst_exact(p, cfg, 10_000)


def test_uncorrelated_mixing_log_spot_is_constant():
    p = PiecewiseParams.flat(0.5, s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=0.5, rho=0.0)
    cfg = McConfig(n_paths=8, steps_per_year=50, seed=3, block_size=8)
    stats = simulate(p, 0.5, cfg, inverse_gamma())
    assert stats.x_terminal.shape == (8,)
    # rho = 0: the mixing log-spot does not depend on the spot noise
    assert np.all(stats.x_mixing == p.x0)


def test_euler_and_exact_paths_are_close(safe_params):
    cfg = McConfig(n_paths=16, steps_per_year=2000, seed=9, block_size=16)
    times, exact = simulate_verhulst_exact(safe_params, cfg, 3, 0.25)
    euler_times, euler = simulate_euler(verhulst(), safe_params, cfg, 3, 0.25)
    assert np.array_equal(times, euler_times)
    assert np.max(np.abs(exact - euler)) < 1e-2


def test_euler_converges_strongly_to_exact_paths():
    p = PiecewiseParams.flat(0.5, s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=0.92, rho=-0.63)
    ladder = [64, 128, 256, 512]
    errors = []
    for steps in ladder:
        cfg = McConfig(n_paths=2000, steps_per_year=steps, seed=17, block_size=2000)
        exact = _simulate_block(p, None, 0.5, cfg, 0, keep_paths=True).volatility[:, -1]
        euler = _simulate_block(p, verhulst(), 0.5, cfg, 0, keep_paths=True).volatility[:, -1]
        errors.append(float(np.mean(np.abs(exact - euler))))
    slope = -np.polyfit(np.log(ladder), np.log(errors), 1)[0]
    assert 0.4 <= slope <= 1.1


def test_antithetic_toggle_keeps_the_mean(safe_params):
    k = math.log(100.0)
    paired = price_plain_mc(safe_params, k, 0.25, McConfig(n_paths=20000, steps_per_year=250, seed=8,
                                                            block_size=4000))
    single = price_plain_mc(safe_params, k, 0.25, McConfig(n_paths=20000, steps_per_year=250, seed=8,
                                                            block_size=4000, antithetic=False))
    assert abs(paired.mean - single.mean) < 3.0 * math.hypot(paired.std_error, single.std_error)
    assert paired.std_error <= single.std_error


def test_inverse_gamma_expansion_within_mc_error(safe_params):
    maturity = 1.0 / 12.0
    k = math.log(100.0 * math.exp(0.02 * maturity))
    approx = price_second_order_general(inverse_gamma(), safe_params, k, maturity, Backend.QUADRATURE)
    cfg = McConfig(n_paths=20000, steps_per_year=500, seed=21, block_size=4000)
    estimate = price_mixing_mc(safe_params, k, maturity, cfg, model=inverse_gamma())
    assert abs(approx.total - estimate.mean) < 3.0 * estimate.std_error


def test_estimators_agree(safe_params):
    k = math.log(100.0)
    cfg = McConfig(n_paths=20000, steps_per_year=250, seed=5, block_size=4000)
    mixing = price_mixing_mc(safe_params, k, 0.25, cfg)
    plain = price_plain_mc(safe_params, k, 0.25, cfg)
    assert mixing.std_error < plain.std_error
    assert abs(mixing.mean - plain.mean) < 3.0 * math.hypot(mixing.std_error, plain.std_error)


def test_martingale_ratio(safe_params):
    cfg = McConfig(n_paths=20000, steps_per_year=250, seed=5, block_size=4000, estimator=Estimator.PLAIN)
    ratio = martingale_ratio(safe_params, 0.25, cfg)
    assert abs(ratio.mean - 1.0) < 4.0 * ratio.std_error + 1e-4


def test_mixing_estimate_is_black_scholes_average():
    p = deterministic_params(lam=0.4, rho=-0.5, degenerate_ok=False)
    k = math.log(95.0)
    cfg = McConfig(n_paths=256, steps_per_year=50, seed=2, block_size=128)
    stats = simulate(p, 0.5, cfg)
    samples = bs.put_values(stats.x_mixing, stats.y_mixing, k, 0.01)
    assert price_mixing_mc(p, k, 0.5, cfg).mean == pytest.approx(float(np.mean(samples)), rel=1e-12)


def _atm_gap_bps(p: PiecewiseParams, maturity: float, cfg: McConfig) -> tuple[float, float]:
    """(expansion vol - Monte Carlo vol, one Monte Carlo standard error), both in basis points."""
    forward = 100.0 * math.exp(0.02 * maturity)
    k = math.log(forward)
    estimate = price_mixing_mc(p, k, maturity, cfg)
    approx = price_second_order_verhulst(p, k, maturity, Backend.QUADRATURE)
    mc_vol = implied_vol(estimate.mean, 100.0, forward, maturity, 0.02, 0.0).sigma
    approx_vol = implied_vol(approx.total, 100.0, forward, maturity, 0.02, 0.0).sigma
    error = estimate.std_error / vega(100.0, forward, maturity, 0.02, 0.0, mc_vol)
    return (approx_vol - mc_vol) * 1e4, error * 1e4


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.5, 0.92, 1.2])
def test_one_month_atm_agrees_with_simulation(lam):
    p = PiecewiseParams.flat(1.0, s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=lam, rho=-0.63, r_d=0.02)
    cfg = McConfig(n_paths=500_000, steps_per_year=2000, seed=11, block_size=50_000)
    gap, error = _atm_gap_bps(p, 1.0 / 12.0, cfg)
    assert abs(gap) < 3.0 * error + 2.0


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="reference desk figures are not reproduced by simulation of this model")
@pytest.mark.parametrize("maturity,lam,expected", [
    (1.0 / 12.0, 0.92, 7.66),
    (0.25, 0.92, 14.85),
    (1.0, 0.92, 26.52),
    (1.0 / 12.0, 0.5, -1.60),
    (1.0 / 12.0, 1.2, 8.71),
])
def test_reference_desk_atm_gaps(maturity, lam, expected):
    p = PiecewiseParams.flat(1.0, s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=lam, rho=-0.63, r_d=0.02)
    cfg = McConfig(n_paths=500_000, steps_per_year=1000, seed=11, block_size=50_000)
    gap, _ = _atm_gap_bps(p, maturity, cfg)
    assert gap == pytest.approx(expected, abs=3.0)
