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

import pytest

from pyverhulst.market_model import PiecewiseParams, TimeGrid

# market and model values of the reference parameter set used across the suite
SAFE = dict(s0=100.0, v0=0.18, kappa=8.0, theta=0.15, lam=0.92, rho=-0.63, r_d=0.02, r_f=0.0)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def safe_params() -> PiecewiseParams:
    return PiecewiseParams.flat(1.0, **SAFE)


@pytest.fixture
def piecewise_params() -> PiecewiseParams:
    return PiecewiseParams(
        grid=TimeGrid((0.0, 1.0 / 12.0, 0.25, 0.5)),
        kappa=(8.0, 6.5, 10.0),
        theta=(0.15, 0.17, 0.14),
        lam=(0.92, 0.7, 1.1),
        rho=(-0.63, -0.4, -0.7),
        r_d=(0.02, 0.025, 0.03),
        r_f=(0.0, 0.005, 0.01),
        s0=100.0,
        v0=0.18,
    )


@pytest.fixture
def params_document() -> dict:
    return {
        "s0": 100.0,
        "v0": 0.18,
        "grid": [0.0, "1M"],
        "kappa": [8.0],
        "theta": [0.15],
        "lambda": [0.92],
        "rho": [-0.63],
        "r_d": [0.02],
        "r_f": [0.0],
    }
