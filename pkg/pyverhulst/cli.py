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

"""Command-line front end.

    pyverhulst price --config params.json
    pyverhulst mc-validate --config params.json --paths 200000
    pyverhulst sensitivity --config params.json --vary kappa --values 6 7 8 --out table.csv
    pyverhulst calibrate --config params.json --quotes quotes.csv --out fitted.json
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path
from typing import Any, TypedDict

from .calibration import CalibrationProblem, RhoMode, calibrate_bootstrap, read_quotes_csv
from .errors import (CalibrationInputError, NoRootError, ParameterError, PriceBoundsError, PyVerhulstError,
                     QuotesFormatError)
from .impliedvol import implied_vol, strike_from_delta
from .market_model import DeltaTag, ModelSpec, PiecewiseParams, check_martingale_condition, load_params, parse_tenor
from .montecarlo import Estimator, McConfig, McEstimate, estimate_from_statistics, simulate
from .pricer import Backend, PriceResult, integrated_variance, price_second_order_general
from .zeroth_order import DEFAULT_SUB_STEPS

logger = logging.getLogger(__name__)

SENSITIVITY_MATURITIES = ("1M", "3M", "6M", "1Y")
VARY_FIELDS = {"kappa": "kappa", "theta": "theta", "lambda": "lam", "rho": "rho"}
BPS = 1e4


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 2
    NUMERICAL_FAILURE = 3
    PARTIAL_RESULT = 4


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    seed: int | None
    input_hash: str
    started_at: str
    finished_at: str | None = None

    def write(self, out: Path):
        self.finished_at = _now()
        path = out.with_name(out.name + ".manifest.json")
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


class EstimatorReport(TypedDict):
    price: float
    std_error: float
    vol: float
    gap_bps: float


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def input_hash(command: str, document: dict[str, Any], extra: dict[str, Any] | None = None,
               files: Sequence[Path] = ()) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps({"command": command, "config": document, "extra": extra or {}},
                             sort_keys=True, separators=(",", ":")).encode("utf-8"))
    for f in files:
        digest.update(f.read_bytes())
    return digest.hexdigest()


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        raise ParameterError("config", "--config is required")
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ParameterError("config", f"file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ParameterError("config", f"invalid JSON: {e}") from None


def mc_config(document: dict[str, Any], args: argparse.Namespace) -> McConfig:
    section = dict(document.get("mc", {}))
    overrides = {
        "n_paths": args.paths,
        "steps_per_year": args.steps_per_year,
        "seed": args.seed,
        "estimator": args.estimator,
        "workers": args.workers,
        "block_size": args.block_size,
    }
    section.update({k: v for k, v in overrides.items() if v is not None})
    if "estimator" in section:
        try:
            section["estimator"] = Estimator(section["estimator"])
        except ValueError:
            raise ParameterError("estimator", f"expected plain or mixing, got {section['estimator']!r}") from None
    unknown = set(section) - set(McConfig.__dataclass_fields__)
    if unknown:
        raise ParameterError("mc", f"unknown keys {sorted(unknown)}")
    return McConfig(**section)


def _backend(document: dict[str, Any], args: argparse.Namespace) -> Backend:
    value = args.backend or document.get("pricing", {}).get("backend", Backend.PIECEWISE_RECURSION.value)
    try:
        return Backend(value)
    except ValueError:
        raise ParameterError("backend", f"expected quadrature or recursion, got {value!r}") from None


def _flat_rates(p: PiecewiseParams, maturity: float) -> tuple[float, float]:
    int_rd, int_rf = p.integrated_rates(maturity)
    return int_rd / maturity, int_rf / maturity


def _strike(p: PiecewiseParams, spec: str | float, maturity: float, sigma_ref: float) -> float:
    if isinstance(spec, str) and spec.upper() in DeltaTag.__members__:
        r_d, r_f = _flat_rates(p, maturity)
        return strike_from_delta(DeltaTag[spec.upper()], sigma_ref, p.s0, maturity, r_d, r_f)
    try:
        return float(spec)
    except ValueError:
        raise ParameterError("strike", f"expected a number or one of {list(DeltaTag.__members__)}") from None


def _delta_tags(names: Sequence[str]) -> list[DeltaTag]:
    unknown = [n for n in names if n not in DeltaTag.__members__]
    if unknown:
        raise ParameterError("deltas", f"unknown delta tags {unknown}, expected {list(DeltaTag.__members__)}")
    return [DeltaTag[n] for n in names]


def _vol(p: PiecewiseParams, price: float, strike: float, maturity: float) -> float:
    r_d, r_f = _flat_rates(p, maturity)
    return implied_vol(price, p.s0, strike, maturity, r_d, r_f).sigma


def _price(model: ModelSpec, p: PiecewiseParams, strikes: list[float], maturity: float, backend: Backend,
           sub_steps: int) -> list[PriceResult]:
    cut = p.with_node(maturity).truncated(maturity)
    return price_second_order_general(model, cut, [math.log(k) for k in strikes], maturity, backend,
                                      sub_steps=sub_steps)


def _write_csv(out: Path | None, manifest_hash: str, rows: list[list[str]]):
    text = f"# manifest {manifest_hash}\n" + "".join(",".join(r) + "\n" for r in rows)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_price(document: dict[str, Any], args: argparse.Namespace) -> tuple[ExitCode, dict[str, Any]]:
    p, model = load_params(document)
    section = document.get("pricing", {})
    maturity = parse_tenor(section.get("maturity", p.grid.maturity))
    sub_steps = int(section.get("sub_steps", DEFAULT_SUB_STEPS))
    backend = _backend(document, args)
    # delta strikes use the vol of the zeroth-order path as reference
    cut = p.with_node(maturity).truncated(maturity)
    sigma_ref = math.sqrt(integrated_variance(model, cut, maturity, backend, sub_steps=sub_steps) / maturity)
    strike = _strike(p, section.get("strike", section.get("delta", "ATM")), maturity, sigma_ref)
    result = _price(model, p, [strike], maturity, backend, sub_steps)[0]
    report = {
        "maturity": maturity,
        "strike": strike,
        "backend": backend.value,
        "total": round(result.total, 10),
        "base_bs": round(result.base_bs, 10),
        "corrections": {c.name: round(c.contribution, 10) for c in result.corrections},
        "implied_vol": round(_vol(p, result.total, strike, maturity), 6),
        "zeroth_order_vol": round(math.sqrt(result.integrated_variance / maturity), 6),
        "martingale_ok": check_martingale_condition(p, model).ok,
    }
    print(json.dumps(report, indent=2))
    return ExitCode.OK, report


def _mc_vol(p: PiecewiseParams, estimate: McEstimate, strike: float, maturity: float) -> float:
    return _vol(p, estimate.mean, strike, maturity)


def _estimator_report(estimate: McEstimate, vol: float, approx_vol: float) -> EstimatorReport:
    return {"price": round(estimate.mean, 10), "std_error": round(estimate.std_error, 10), "vol": round(vol, 8),
            "gap_bps": round((approx_vol - vol) * BPS, 2)}


def cmd_mc_validate(document: dict[str, Any], args: argparse.Namespace,
                    mc: McConfig) -> tuple[ExitCode, dict[str, Any]]:
    p, model = load_params(document)
    section = document.get("pricing", {})
    maturity = parse_tenor(section.get("maturity", p.grid.maturity))
    sub_steps = int(section.get("sub_steps", DEFAULT_SUB_STEPS))
    stats = simulate(p, maturity, mc, model)
    forward_strike = _strike(p, "ATM", maturity, 1.0)
    atm = estimate_from_statistics(stats, p, math.log(forward_strike), maturity, mc, Estimator.MIXING)
    sigma_ref = _mc_vol(p, atm, forward_strike, maturity)
    strike = _strike(p, section.get("strike", section.get("delta", "ATM")), maturity, sigma_ref)
    k = math.log(strike)
    mixing = estimate_from_statistics(stats, p, k, maturity, mc, Estimator.MIXING)
    plain = estimate_from_statistics(stats, p, k, maturity, mc, Estimator.PLAIN)
    approx = _price(model, p, [strike], maturity, _backend(document, args), sub_steps)[0]
    approx_vol = _vol(p, approx.total, strike, maturity)
    mixing_vol, plain_vol = _mc_vol(p, mixing, strike, maturity), _mc_vol(p, plain, strike, maturity)
    combined = math.hypot(mixing.std_error, plain.std_error)
    report = {
        "maturity": maturity,
        "strike": strike,
        "approx": {"price": round(approx.total, 10), "vol": round(approx_vol, 8)},
        "mixing": _estimator_report(mixing, mixing_vol, approx_vol),
        "plain": _estimator_report(plain, plain_vol, approx_vol),
        "estimators_agree": abs(mixing.mean - plain.mean) <= 3.0 * combined,
        "n_paths": mc.n_paths,
    }
    print(json.dumps(report, indent=2))
    return ExitCode.OK, report


def _sensitivity_params(p: PiecewiseParams, field_name: str, value: float) -> PiecewiseParams:
    return p.with_values(**{field_name: value})


def cmd_sensitivity(document: dict[str, Any], args: argparse.Namespace, vary: str, values: Sequence[float],
                    deltas: Sequence[DeltaTag], mc: McConfig) -> tuple[ExitCode, list[list[str]]]:
    """bps error (approximation minus Monte Carlo implied vol) per delta, maturity and value."""
    if vary not in VARY_FIELDS:
        raise ParameterError("vary", f"expected one of {sorted(VARY_FIELDS)}, got {vary!r}")
    if not values:
        raise ParameterError("values", "at least one value is needed")
    p, model = load_params(document)
    section = document.get("sensitivity", {})
    maturities = [parse_tenor(m) for m in section.get("maturities", SENSITIVITY_MATURITIES)]
    labels = [str(m) for m in section.get("maturities", SENSITIVITY_MATURITIES)]
    sub_steps = int(document.get("pricing", {}).get("sub_steps", DEFAULT_SUB_STEPS))
    backend = _backend(document, args)
    table: dict[tuple[DeltaTag, int, int], float] = {}
    partial = False
    for j, value in enumerate(values):
        varied = _sensitivity_params(p, VARY_FIELDS[vary], value)
        for m, maturity in enumerate(maturities):
            try:
                base = varied.with_node(maturity).truncated(maturity) if maturity < varied.grid.maturity \
                    else varied
                stats = simulate(base, maturity, mc, model)
                forward = _strike(base, "ATM", maturity, 1.0)
                atm = estimate_from_statistics(stats, base, math.log(forward), maturity, mc, mc.estimator)
                sigma_ref = _mc_vol(base, atm, forward, maturity)
                strikes = [_strike(base, d.value, maturity, sigma_ref) for d in deltas]
                approx = _price(model, base, strikes, maturity, backend, sub_steps)
                for d, strike, result in zip(deltas, strikes, approx):
                    estimate = estimate_from_statistics(stats, base, math.log(strike), maturity, mc, mc.estimator)
                    table[(d, m, j)] = (_vol(base, result.total, strike, maturity)
                                        - _mc_vol(base, estimate, strike, maturity)) * BPS
            except (ArithmeticError, PriceBoundsError, NoRootError) as e:
                logger.warning(f"Sensitivity cell {vary}={value} T={maturity} failed: {e}")
                partial = True
    rows = [["delta", "maturity"] + [f"{vary}={v:g}" for v in values]]
    for d in deltas:
        for m, label in enumerate(labels):
            cells = [f"{table[(d, m, j)]:.2f}" if (d, m, j) in table else "nan" for j in range(len(values))]
            rows.append([d.value, label] + cells)
    if args.plot_data:
        _write_plot_data(Path(args.plot_data), vary, values, deltas, labels, table)
    return (ExitCode.PARTIAL_RESULT if partial else ExitCode.OK), rows


def _write_plot_data(path: Path, vary: str, values: Sequence[float], deltas: Sequence[DeltaTag],
                     labels: Sequence[str], table: dict[tuple[DeltaTag, int, int], float]):
    # one gnuplot data block per delta, separated by two blank lines
    blocks = []
    for d in deltas:
        lines = [f"# {d.value}: {vary} " + " ".join(labels)]
        for j, value in enumerate(values):
            cells = [f"{table[(d, m, j)]:.2f}" if (d, m, j) in table else "NaN" for m in range(len(labels))]
            lines.append(f"{value:g} " + " ".join(cells))
        blocks.append("\n".join(lines))
    path.write_text("\n\n\n".join(blocks) + "\n", encoding="utf-8")


def cmd_calibrate(quotes_path: Path, document: dict[str, Any],
                  args: argparse.Namespace) -> tuple[ExitCode, dict[str, Any]]:
    p, model = load_params(document)
    section = document.get("calibration", {})
    try:
        rho_mode = RhoMode(section.get("rho_mode", RhoMode.PER_INTERVAL.value))
    except ValueError:
        raise ParameterError("rho_mode", "expected per_interval or global") from None
    bounds = {("lam" if k == "lambda" else k): tuple(v) for k, v in section.get("bounds", {}).items()}
    problem = CalibrationProblem(
        params=p,
        quotes=tuple(read_quotes_csv(quotes_path)),
        bounds=bounds,
        regularization_weight=float(section.get("regularization_weight", 1e-4)),
        rho_mode=rho_mode,
        max_evals=int(section.get("max_evals", 500)),
        sub_steps=int(section.get("sub_steps", DEFAULT_SUB_STEPS)),
        model=model,
    )
    result = calibrate_bootstrap(problem)
    report = {
        "per_maturity_rmse_bps": [round(r, 2) for r in result.per_maturity_rmse],
        "objective_evals": result.objective_evals,
        "martingale_ok": result.martingale_ok,
        "converged": list(result.converged),
        "params": result.params.to_json_dict(model.name),
    }
    print(json.dumps(report, indent=2))
    if args.out:
        fitted = dict(document)
        fitted.update(result.params.to_json_dict(model.name))
        Path(args.out).write_text(json.dumps(fitted, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return (ExitCode.PARTIAL_RESULT if result.partial else ExitCode.OK), report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="parameter JSON with optional pricing/mc/sensitivity/calibration sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--steps-per-year", type=int)
    common.add_argument("--estimator", choices=[e.value for e in Estimator])
    common.add_argument("--backend", choices=[b.value for b in Backend])
    common.add_argument("--workers", type=int)
    common.add_argument("--block-size", type=int)
    common.add_argument("--out", help="output file; CSV tables go to stdout without it")
    common.add_argument("--plot-data", help="write gnuplot-compatible columns to this file")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="pyverhulst", description="Second-order put prices in the "
                                                                    "stochastic Verhulst volatility model")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("price", parents=[common], help="explicit second-order price")
    commands.add_parser("mc-validate", parents=[common], help="approximation against both Monte Carlo estimators")
    sensitivity = commands.add_parser("sensitivity", parents=[common], help="bps error table for one parameter")
    sensitivity.add_argument("--vary", choices=sorted(VARY_FIELDS))
    sensitivity.add_argument("--values", type=float, nargs="*")
    sensitivity.add_argument("--deltas", nargs="*", choices=list(DeltaTag.__members__))
    calibrate = commands.add_parser("calibrate", parents=[common], help="bootstrap calibration to quotes")
    calibrate.add_argument("--quotes", required=True, help="CSV maturity,delta_tag_or_strike,implied_vol[,weight]")
    return parser


def run(args: argparse.Namespace) -> ExitCode:
    document = load_config(args.config)
    out = Path(args.out) if args.out else None
    extra = {k: v for k, v in vars(args).items() if k not in ("config", "out", "plot_data", "log_level", "workers")}
    files = [Path(args.quotes)] if args.command == "calibrate" else []
    manifest = RunManifest(args.command, args.config, args.seed, "", _now())
    if args.command == "price":
        code, report = cmd_price(document, args)
        manifest.input_hash = input_hash(args.command, document, extra)
        if out:
            out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    elif args.command == "mc-validate":
        mc = mc_config(document, args)
        manifest.seed = mc.seed
        code, report = cmd_mc_validate(document, args, mc)
        manifest.input_hash = input_hash(args.command, document, extra)
        if out:
            rows = [["field", "value"]] + [[f"{name}.{k}", str(v)] for name in ("approx", "mixing", "plain")
                                           for k, v in report[name].items()]
            _write_csv(out, manifest.input_hash, rows)
    elif args.command == "sensitivity":
        section = document.get("sensitivity", {})
        mc = mc_config(document, args)
        manifest.seed = mc.seed
        vary = args.vary or section.get("vary")
        values = args.values if args.values is not None else section.get("values", [])
        deltas = _delta_tags(args.deltas or section.get("deltas", ["PUT10", "PUT25", "ATM"]))
        code, rows = cmd_sensitivity(document, args, vary, values, deltas, mc)
        manifest.input_hash = input_hash(args.command, document, extra)
        _write_csv(out, manifest.input_hash, rows)
    else:
        manifest.input_hash = input_hash(args.command, document, extra, files)
        code, _ = cmd_calibrate(Path(args.quotes), document, args)
    if out:
        manifest.write(out)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        return int(run(args))
    except (ParameterError, CalibrationInputError, QuotesFormatError, OSError) as e:
        field_name = getattr(e, "field", None)
        prefix = f"configuration error in {field_name!r}" if field_name else "configuration error"
        print(f"{prefix}: {e}", file=sys.stderr)
        return int(ExitCode.CONFIG_ERROR)
    except (PyVerhulstError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return int(ExitCode.NUMERICAL_FAILURE)
