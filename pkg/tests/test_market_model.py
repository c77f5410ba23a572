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

import json

import pytest

from pyverhulst.errors import ParameterError
from pyverhulst.market_model import (DeltaTag, OptionQuote, PiecewiseParams, TimeGrid, check_martingale_condition,
                                     get_model, load_params, mean_reverting_power, parse_tenor, verhulst)


def test_parse_tenor():
    assert parse_tenor("1M") == pytest.approx(1.0 / 12.0)
    assert parse_tenor("6M") == pytest.approx(0.5)
    assert parse_tenor("1Y") == 1.0
    assert parse_tenor(0.25) == 0.25
    assert parse_tenor("0.75") == 0.75


@pytest.mark.parametrize("boundaries", [(0.0,), (0.1, 1.0), (0.0, 0.5, 0.5), (0.0, 1.0, 0.5)])
def test_time_grid_rejects_bad_boundaries(boundaries):
    with pytest.raises(ParameterError):
        TimeGrid(boundaries)


def test_time_grid_lookup():
    grid = TimeGrid((0.0, 0.25, 0.5, 1.0))
    assert grid.n_intervals == 3
    assert grid.interval_index(0.0) == 0
    assert grid.interval_index(0.25) == 1
    assert grid.interval_index(0.3) == 1
    assert grid.interval_index(1.0) == 2
    assert grid.node_index(0.5) == 2
    assert grid.node_index(0.4) is None
    assert grid.truncated(0.5).boundaries == (0.0, 0.25, 0.5)
    refined = grid.refined(4)
    assert refined.n_intervals == 12
    assert refined.refines(grid)
    assert not grid.refines(refined)


def test_params_broadcast_and_validation(piecewise_params):
    flat = PiecewiseParams.flat(1.0, s0=1.0, v0=0.2, kappa=5.0, theta=0.2, lam=0.5, rho=-0.5)
    assert flat.kappa == (5.0,)
    assert flat.r_d == (0.0,)
    with pytest.raises(ParameterError) as e:
        PiecewiseParams.flat(1.0, s0=1.0, v0=0.2, kappa=5.0, theta=0.2, lam=0.0, rho=-0.5)
    assert e.value.field == "lam"
    with pytest.raises(ParameterError):
        PiecewiseParams.flat(1.0, s0=1.0, v0=0.2, kappa=5.0, theta=0.2, lam=0.5, rho=-1.5)
    zero_vol_of_vol = PiecewiseParams.flat(1.0, s0=1.0, v0=0.2, kappa=5.0, theta=0.2, lam=0.0, rho=0.0,
                                           degenerate_ok=True)
    assert zero_vol_of_vol.lam == (0.0,)
    with pytest.raises(ParameterError):
        PiecewiseParams(piecewise_params.grid, (1.0, 2.0), 0.1, 0.5, 0.0, 0.0, 0.0, 1.0, 0.1)


def test_params_grid_operations(piecewise_params):
    split = piecewise_params.with_node(0.4)
    assert split.grid.boundaries == (0.0, 1.0 / 12.0, 0.25, 0.4, 0.5)
    assert split.kappa == (8.0, 6.5, 10.0, 10.0)
    assert split.with_node(0.4) is split
    cut = split.truncated(0.4)
    assert cut.n_intervals == 3
    assert cut.at(0.3).kappa == 10.0
    assert piecewise_params.at(0.1).theta == 0.17
    assert piecewise_params.integrated("r_d", 0.5) == pytest.approx(0.02 / 12 + 0.025 / 6 + 0.03 / 4)
    changed = piecewise_params.with_interval(1, 1.0, 0.2, 0.3, 0.1)
    assert changed.values(1)[:4] == (1.0, 0.2, 0.3, 0.1)
    assert changed.values(0) == piecewise_params.values(0)
    assert piecewise_params.with_values(lam=0.5).lam == (0.5, 0.5, 0.5)


def test_martingale_condition(safe_params):
    report = check_martingale_condition(safe_params)
    assert report.ok
    assert report.margins[0] == pytest.approx(-8.5796)
    violating = PiecewiseParams.flat(1.0, s0=100.0, v0=0.18, kappa=0.1, theta=0.15, lam=2.0, rho=0.9)
    assert not check_martingale_condition(violating).ok


@pytest.mark.parametrize("changes,ok", [({}, True), ({"kappa": 0.1, "lam": 2.0, "rho": 0.9}, False)])
def test_martingale_condition_ignores_grid_refinement(piecewise_params, changes, ok):
    p = piecewise_params.with_values(**changes)
    report = check_martingale_condition(p)
    assert report.ok is ok
    for finer, repeats in ((p.refined(4), 4), (p.with_node(0.4), None)):
        finer_report = check_martingale_condition(finer)
        assert finer_report.ok is ok
        assert max(finer_report.margins) == max(report.margins)
        if repeats:
            assert finer_report.margins == tuple(m for m in report.margins for _ in range(repeats))


def test_models():
    model = verhulst()
    values = PiecewiseParams.flat(1.0, s0=1.0, v0=0.2, kappa=8.0, theta=0.15, lam=0.9, rho=-0.6).values(0)
    assert model.alpha(values, 0.18) == pytest.approx(8.0 * (0.15 - 0.18) * 0.18)
    assert model.alpha_x(values, 0.18) == pytest.approx(8.0 * 0.15 - 2.0 * 8.0 * 0.18)
    assert model.alpha_xx(values, 0.18) == -16.0
    assert get_model("inverse_gamma").alpha_xx(values, 0.18) == 0.0
    assert get_model("mean_reverting_power", 0.5).mu == 0.5
    with pytest.raises(ParameterError):
        mean_reverting_power(0.3)
    with pytest.raises(ParameterError):
        get_model("sabr")


def test_option_quote_validation():
    assert DeltaTag.PUT25.delta == -0.25
    assert DeltaTag.ATM.delta is None
    with pytest.raises(ParameterError):
        OptionQuote(0.25, 0.18)
    with pytest.raises(ParameterError):
        OptionQuote(0.25, 0.18, strike=100.0, delta=DeltaTag.ATM)
    with pytest.raises(ParameterError):
        OptionQuote(0.25, -0.1, delta=DeltaTag.ATM)
    with pytest.raises(ParameterError):
        OptionQuote(0.3, 0.18, delta=DeltaTag.ATM).check_against(TimeGrid((0.0, 0.25)))


def test_load_params(tmp_path, params_document):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(params_document))
    params, model = load_params(path)
    assert model.name == "verhulst"
    assert params.grid.maturity == pytest.approx(1.0 / 12.0)
    assert params.lam == (0.92,)
    assert load_params(params.to_json_dict())[0] == params
    del params_document["lambda"]
    with pytest.raises(ParameterError) as e:
        load_params(params_document)
    assert e.value.field == "lambda"


def test_load_params_admits_deterministic_limits(params_document):
    params_document["lambda"] = [0.0]
    params_document["kappa"] = 0.0
    params, _ = load_params(params_document)
    assert params.lam == (0.0,) and params.kappa == (0.0,)
    params_document["theta"] = [0.0]
    with pytest.raises(ParameterError) as e:
        load_params(params_document)
    assert e.value.field == "theta"


@pytest.mark.parametrize("name, value, field", [
    ("grid", [0.0, "3X"], "tenor"),
    ("s0", "spot", "params"),
    ("rho", ["low"], "params"),
])
def test_load_params_reports_bad_values(params_document, name, value, field):
    params_document[name] = value
    with pytest.raises(ParameterError) as e:
        load_params(params_document)
    assert e.value.field == field
