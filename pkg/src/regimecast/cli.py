"""Command-line interface.

Three commands: ``backtest`` rolls the full pipeline over a price CSV
and writes a JSON report plus plot-ready CSV tables; ``forecast`` runs
one window off the end of the data and writes a single forecast record;
``selftest`` executes the built-in oracle suite. Every output embeds a
run manifest (inputs, their content hash, tool version) so identical
invocations are byte-identical and auditable.

Exit codes: 0 success, 1 selftest failure, 2 configuration or I/O
problem, 3 data contract violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import backtest as bt
from .errors import DataError, NumericalError, RegimecastError
from .forecast import make_forecast
from .hmm import select_model
from .ingest import compute_returns, load_price_csv, window_view
from .pca import factor_returns, fit_factor_model, normalize
from .selftest import run_selftests

EXIT_OK = 0
EXIT_SELFTEST_FAIL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

CONFIG_FIELDS = {f.name for f in dataclasses.fields(bt.BacktestConfig)}


def _tool_version() -> str:
    try:
        return metadata.version("regimecast")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(command: str, data: Path, config: Path | None,
                   out_dir: Path | None) -> dict:
    inputs = {"data": {"path": str(data), "sha256": _sha256(data)}}
    if config is not None:
        inputs["config"] = {"path": str(config), "sha256": _sha256(config)}
    return {
        "command": command,
        "tool_version": _tool_version(),
        "inputs": inputs,
        "output_dir": str(out_dir) if out_dir is not None else None,
    }


def load_config(path: Path | None, overrides: dict) -> bt.BacktestConfig:
    values: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(raw) - CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "state_candidates" in values:
        values["state_candidates"] = tuple(values["state_candidates"])
    return bt.BacktestConfig(**values)


def _jsonable(obj):
    """Recursively convert report objects to JSON-safe structures.

    NaN becomes null; floats keep full repr precision via json's float
    formatting. Dataclasses become dicts, dates ISO strings.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if np.isnan(v) else v
    if isinstance(obj, dt.date):
        return obj.isoformat()
    return obj


def _fmt(value) -> str:
    """Round-trip decimal formatting for CSV cells."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _manifest_lines(manifest: dict) -> str:
    return "# manifest: " + json.dumps(manifest, sort_keys=True) + "\n"


def write_report_json(path: Path, report: bt.BacktestReport, manifest: dict) -> None:
    payload = {"manifest": manifest, "report": _jsonable(report)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_metrics_csv(path: Path, report: bt.BacktestReport, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_manifest_lines(manifest))
        fh.write("strategy,winning_probability,n_pairs,annualized_sharpe,n_periods\n")
        for name in (*bt.STRATEGIES, "buy_and_hold"):
            m = report.metrics[name]
            fh.write(
                ",".join(
                    [
                        name,
                        _fmt(m.winning_probability),
                        _fmt(m.n_pairs if name != "buy_and_hold" else None),
                        _fmt(m.annualized_sharpe),
                        _fmt(len(m.returns)),
                    ]
                )
                + "\n"
            )


def write_equity_curves_csv(path: Path, report: bt.BacktestReport, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_manifest_lines(manifest))
        fh.write("target_date,strategy_1,strategy_2,buy_and_hold\n")
        s1 = report.metrics["strategy_1"].cumulative
        s2 = report.metrics["strategy_2"].cumulative
        bh = report.metrics["buy_and_hold"].cumulative
        for i, w in enumerate(report.windows):
            fh.write(
                f"{w.target_date.isoformat()},{_fmt(float(s1[i]))},"
                f"{_fmt(float(s2[i]))},{_fmt(float(bh[i]))}\n"
            )


def write_diagnostics_csv(path: Path, report: bt.BacktestReport, manifest: dict) -> None:
    if not report.windows:  # every window skipped; reasons live in the report
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_manifest_lines(manifest))
            fh.write("window,target_date,n_factors,n_states\n")
        return
    tables = bt.diagnostics(report)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_manifest_lines(manifest))
        rank_cols = [
            f"state_mean_rank{r + 1}" for r in range(tables.rank_count)
        ] + [f"state_var_rank{r + 1}" for r in range(tables.rank_count)]
        fh.write("window,target_date,n_factors,n_states," + ",".join(rank_cols) + "\n")
        for row in range(len(tables.indices)):
            cells = [
                str(tables.indices[row]),
                tables.target_dates[row].isoformat(),
                str(tables.k_series[row]),
                str(tables.n_states_series[row]),
            ]
            cells += [_fmt(float(v)) for v in tables.rank_means[row]]
            cells += [_fmt(float(v)) for v in tables.rank_vars[row]]
            fh.write(",".join(cells) + "\n")


def cmd_backtest(args) -> int:
    data = Path(args.data)
    config_path = Path(args.config) if args.config else None
    out_dir = Path(args.out)
    cfg = load_config(
        config_path,
        {
            "p": args.p,
            "window_length": args.window,
            "horizon": args.horizon,
            "min_assets": args.min_assets,
            "workers": args.workers,
        },
    )
    manifest = build_manifest("backtest", data, config_path, out_dir)
    panel = compute_returns(load_price_csv(data))
    report = bt.run_backtest(panel, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(out_dir / "report.json", report, manifest)
    write_metrics_csv(out_dir / "metrics.csv", report, manifest)
    write_equity_curves_csv(out_dir / "equity_curves.csv", report, manifest)
    write_diagnostics_csv(out_dir / "diagnostics.csv", report, manifest)
    print(
        f"backtest: {len(report.windows)} windows evaluated, "
        f"{len(report.skipped)} skipped; outputs in {out_dir}"
    )
    return EXIT_OK


def cmd_forecast(args) -> int:
    data = Path(args.data)
    config_path = Path(args.config) if args.config else None
    out_dir = Path(args.out)
    cfg = load_config(
        config_path,
        {
            "p": args.p,
            "window_length": args.window,
            "min_assets": args.min_assets,
        },
    )
    manifest = build_manifest("forecast", data, config_path, out_dir)
    panel = compute_returns(load_price_csv(data))
    if panel.n_periods < cfg.window_length:
        raise DataError(
            f"need {cfg.window_length} return rows, have {panel.n_periods}"
        )
    start = panel.n_periods - cfg.window_length
    window = window_view(panel, start, cfg.window_length, cfg.min_assets)
    y, stats = normalize(window)
    fmodel = fit_factor_model(y, cfg.p, stats)
    fpanel = factor_returns(y, fmodel, dates=window.dates)
    fit, aic_table = select_model(
        fpanel.values,
        candidates=cfg.state_candidates,
        tol=cfg.em_tol,
        max_iter=cfg.em_max_iter,
        aic_penalty=cfg.aic_penalty,
    )
    # Target the next period after the last observed date, assuming the
    # data's own (modal) spacing.
    gaps = [
        (b - a).days for a, b in zip(panel.dates, panel.dates[1:])
    ]
    spacing = max(set(gaps), key=gaps.count) if gaps else 7
    target = panel.dates[-1] + dt.timedelta(days=spacing)
    record = make_forecast(fit, fpanel, fmodel, target)

    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "manifest": manifest,
        "forecast": {
            "target_date": target.isoformat(),
            "assets": list(window.assets),
            "n_factors": fmodel.k,
            "n_states": fit.model.n_states,
            "current_state": record.current_state,
            "aic_table": _jsonable(aic_table),
            "factor_forecast": _jsonable(record.factor_forecast),
            "raw_forecast": _jsonable(record.raw_forecast),
            "normalized_forecast": _jsonable(record.normalized_forecast),
            "signs_raw": _jsonable(record.signs_raw),
            "signs_normalized": _jsonable(record.signs_normalized),
        },
    }
    out_path = out_dir / "forecast.json"
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    print(f"forecast written to {out_path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    outcomes = run_selftests(args.filter)
    if not outcomes:
        print(f"no checks match filter {args.filter!r}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(o.name) for o in outcomes)
    failures = 0
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        failures += not o.passed
        print(f"{status}  {o.name:<{width}}  [{o.module}]  {o.detail}  ({o.seconds:.2f}s)")
    print(f"{len(outcomes) - failures}/{len(outcomes)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_SELFTEST_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regimecast",
        description="Regime-switching factor forecasts and rolling backtests",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_back = sub.add_parser("backtest", help="roll the pipeline over a price CSV")
    p_fore = sub.add_parser("forecast", help="one forecast from the latest window")
    for p in (p_back, p_fore):
        p.add_argument("--data", required=True, help="price CSV (date,TICKER,... )")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--p", type=float, help="noise fraction in [0,1)")
        p.add_argument("--window", type=int, help="window length in periods")
        p.add_argument("--min-assets", type=int, dest="min_assets",
                       help="minimum complete assets per window")
    p_back.add_argument("--horizon", type=int, help="number of forecast windows")
    p_back.add_argument("--workers", type=int, help="parallel window workers")
    p_back.set_defaults(func=cmd_backtest)
    p_fore.set_defaults(func=cmd_forecast)

    p_self = sub.add_parser("selftest", help="run the built-in oracle suite")
    p_self.add_argument("--filter", help="only checks for this module or name")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _fail("config", exc)
        return EXIT_CONFIG
    except DataError as exc:
        _fail("data", exc)
        return EXIT_DATA
    except (NumericalError, RegimecastError) as exc:
        _fail("numerical", exc)
        return EXIT_NUMERICAL


def _fail(kind: str, exc: Exception) -> None:
    print(
        json.dumps(
            {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
        ),
        file=sys.stderr,
    )


def entrypoint() -> None:
    sys.exit(main(argv=None))


if __name__ == "__main__":
    entrypoint()
