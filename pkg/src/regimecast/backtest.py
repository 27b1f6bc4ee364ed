"""Rolling-window backtest of the sign-based trading strategies.

Each window: complete-case slice, column standardization, truncated
eigen-factor model, state-count selection by AIC, one-step forecast,
then realized next-period returns score two strategies (raw-return
signs and normalized-return signs) against equal-weight buy-and-hold.
Windows are independent given the input panel, so they may be evaluated
in parallel; the assembled report is chronological and identical to a
sequential run.
"""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyInput,
    EmptyReport,
    InsufficientHistory,
    NoPositions,
    RegimecastError,
    TooShort,
    ZeroVolatility,
)
from .forecast import ForecastRecord, make_forecast
from .hmm import DEFAULT_CANDIDATES, DEFAULT_MAX_ITER, DEFAULT_TOL, select_model
from .ingest import ReturnsPanel, window_view
from .pca import factor_returns, fit_factor_model, normalize

P_GRID = (0.45, 0.30, 0.15, 0.10)  # conventional noise-budget choices
STRATEGIES = ("strategy_1", "strategy_2")


@dataclass(frozen=True)
class BacktestConfig:
    """Engine parameters; defaults target ten years of weekly data."""

    window_length: int = 520
    step: int = 1
    horizon: int = 100
    p: float = 0.15
    min_assets: int = 400
    state_candidates: tuple = DEFAULT_CANDIDATES
    periods_per_year: int = 52
    risk_free_rate: float = 0.0
    aic_penalty: str = "states"
    em_tol: float = DEFAULT_TOL
    em_max_iter: int = DEFAULT_MAX_ITER
    workers: int = 1

    def __post_init__(self):
        if self.window_length < 3:
            raise ValueError("window_length must be >= 3")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if not (0.0 <= self.p < 1.0):
            raise ValueError("p must be in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class WindowResult:
    """One evaluated window: forecast, realization, and diagnostics."""

    index: int
    target_date: dt.date
    assets: tuple[str, ...]
    forecast: ForecastRecord
    realized: np.ndarray = field(repr=False)
    k: int
    n_states: int
    sorted_state_means: np.ndarray = field(repr=False)
    sorted_state_vars: np.ndarray = field(repr=False)
    strategy_returns: dict


@dataclass(frozen=True)
class SkippedWindow:
    index: int
    target_date: dt.date | None
    reason: str


@dataclass(frozen=True)
class StrategyMetrics:
    winning_probability: float | None
    n_pairs: int
    annualized_sharpe: float | None
    sharpe_note: str | None
    returns: np.ndarray = field(repr=False)
    cumulative: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class BacktestReport:
    config: BacktestConfig
    windows: tuple[WindowResult, ...]
    skipped: tuple[SkippedWindow, ...]
    metrics: dict


@dataclass(frozen=True)
class DiagnosticTables:
    """Plot-ready series: factor/state counts and ranked regime stats.

    Ranked columns are truncated to the smallest state count selected in
    any window, so every window contributes a full row.
    """

    indices: tuple[int, ...]
    target_dates: tuple[dt.date, ...]
    k_series: tuple[int, ...]
    n_states_series: tuple[int, ...]
    rank_count: int
    rank_means: np.ndarray = field(repr=False)
    rank_vars: np.ndarray = field(repr=False)


def strategy_positions(strategy: int, record: ForecastRecord) -> np.ndarray:
    """Equal-weight long/short weights from forecast signs.

    Strategy 1 follows raw-return signs, strategy 2 follows
    normalized-return signs (excess over the window average). Weights
    are sign/n_active; zero-sign assets carry no position.
    """
    if strategy not in (1, 2):
        raise ValueError(f"strategy must be 1 or 2, got {strategy}")
    signs = record.signs_raw if strategy == 1 else record.signs_normalized
    n_active = int(np.count_nonzero(signs))
    if n_active == 0:
        raise NoPositions("all forecast signs are zero this window")
    return signs.astype(np.float64) / n_active


def winning_probability(pairs) -> float:
    """Fraction of correctly signed forecasts.

    ``pairs`` is an iterable of (forecast_sign, realized_return).
    Zero-sign forecasts carry no trade and leave the denominator; a
    realized return of exactly zero counts as a miss.
    """
    scored = 0
    wins = 0
    for sign, realized in pairs:
        if sign == 0:
            continue
        scored += 1
        if np.sign(realized) == sign:
            wins += 1
    if scored == 0:
        raise EmptyInput("no scorable (nonzero-sign) forecast pairs")
    return wins / scored


def annualized_sharpe(returns, periods_per_year: int, rf: float = 0.0) -> float:
    """(mean - rf) / sample std, scaled by sqrt(periods_per_year)."""
    r = np.asarray(returns, dtype=np.float64)
    if r.size < 2:
        raise TooShort("need at least two periods for a Sharpe ratio")
    sd = float(r.std(ddof=1))
    if sd == 0.0:
        raise ZeroVolatility("constant return series")
    return (float(r.mean()) - rf) / sd * float(np.sqrt(periods_per_year))


def buy_and_hold(panel: ReturnsPanel, target_rows) -> np.ndarray:
    """Weekly-rebalanced equal-weight return across all present assets."""
    out = np.empty(len(target_rows))
    for i, row in enumerate(target_rows):
        values = panel.returns[row]
        present = values[~np.isnan(values)]
        if present.size == 0:
            raise EmptyInput(f"no present returns in period row {row}")
        out[i] = float(present.mean())
    return out


def _evaluate_window(
    panel: ReturnsPanel, cfg: BacktestConfig, index: int, start: int
) -> WindowResult:
    """Run the full pipeline for one window. Pure; raises on failure."""
    window = window_view(panel, start, cfg.window_length, cfg.min_assets)
    y, stats = normalize(window)
    fmodel = fit_factor_model(y, cfg.p, stats)
    fpanel = factor_returns(y, fmodel, dates=window.dates)
    fit, _ = select_model(
        fpanel.values,
        candidates=cfg.state_candidates,
        tol=cfg.em_tol,
        max_iter=cfg.em_max_iter,
        aic_penalty=cfg.aic_penalty,
    )
    target_row = start + cfg.window_length
    target_date = panel.dates[target_row]
    record = make_forecast(fit, fpanel, fmodel, target_date)

    col_of = {a: i for i, a in enumerate(panel.assets)}
    realized = panel.returns[target_row, [col_of[a] for a in window.assets]]

    strategy_returns = {}
    realized_filled = np.where(np.isnan(realized), 0.0, realized)
    for strat, name in ((1, "strategy_1"), (2, "strategy_2")):
        try:
            weights = strategy_positions(strat, record)
            strategy_returns[name] = float(weights @ realized_filled)
        except NoPositions:
            strategy_returns[name] = 0.0

    mean_by_state = fit.model.means.mean(axis=1)
    var_by_state = fit.model.variances.mean(axis=1)
    order = np.argsort(-mean_by_state, kind="stable")
    return WindowResult(
        index=index,
        target_date=target_date,
        assets=window.assets,
        forecast=record,
        realized=realized,
        k=fmodel.k,
        n_states=fit.model.n_states,
        sorted_state_means=mean_by_state[order],
        sorted_state_vars=var_by_state[order],
        strategy_returns=strategy_returns,
    )


def _evaluate_window_task(args):
    return _evaluate_window(*args)


def run_backtest(panel: ReturnsPanel, cfg: BacktestConfig) -> BacktestReport:
    """Roll the pipeline across `horizon` windows and aggregate metrics.

    A failure inside one window (too few complete assets, a degenerate
    column, EM trouble) is recorded under ``skipped`` and the run
    continues. The report is deterministic in (panel, cfg) and does not
    depend on the worker count.
    """
    need = cfg.window_length + (cfg.horizon - 1) * cfg.step + 1
    if panel.n_periods < need:
        raise InsufficientHistory(
            f"panel has {panel.n_periods} periods, need {need} for "
            f"window {cfg.window_length} x horizon {cfg.horizon} (step {cfg.step})"
        )
    starts = [i * cfg.step for i in range(cfg.horizon)]

    windows: list[WindowResult] = []
    skipped: list[SkippedWindow] = []
    if cfg.workers > 1:
        tasks = [(panel, cfg, i, s) for i, s in enumerate(starts)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = []
            futures = [pool.submit(_evaluate_window_task, t) for t in tasks]
            for fut, (i, s) in zip(futures, enumerate(starts)):
                try:
                    outcomes.append(fut.result())
                except RegimecastError as exc:
                    outcomes.append(_skip(panel, cfg, i, s, exc))
    else:
        outcomes = []
        for i, s in enumerate(starts):
            try:
                outcomes.append(_evaluate_window(panel, cfg, i, s))
            except RegimecastError as exc:
                outcomes.append(_skip(panel, cfg, i, s, exc))
    for item in outcomes:
        (windows if isinstance(item, WindowResult) else skipped).append(item)

    metrics = _aggregate_metrics(panel, cfg, windows)
    return BacktestReport(
        config=cfg, windows=tuple(windows), skipped=tuple(skipped), metrics=metrics
    )


def _skip(panel, cfg, index, start, exc) -> SkippedWindow:
    target_row = start + cfg.window_length
    date = panel.dates[target_row] if target_row < panel.n_periods else None
    return SkippedWindow(
        index=index, target_date=date, reason=f"{type(exc).__name__}: {exc}"
    )


def _sharpe_or_note(returns, cfg) -> tuple[float | None, str | None]:
    try:
        return annualized_sharpe(returns, cfg.periods_per_year, cfg.risk_free_rate), None
    except (ZeroVolatility, TooShort) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _aggregate_metrics(panel, cfg, windows) -> dict:
    metrics: dict = {}
    target_rows = [w.index * cfg.step + cfg.window_length for w in windows]
    for strat, name in ((1, "strategy_1"), (2, "strategy_2")):
        rets = np.array([w.strategy_returns[name] for w in windows])
        pairs = []
        for w in windows:
            signs = (
                w.forecast.signs_raw if strat == 1 else w.forecast.signs_normalized
            )
            for sign, realized in zip(signs, w.realized):
                if not np.isnan(realized):
                    pairs.append((int(sign), float(realized)))
        try:
            wp = winning_probability(pairs)
        except EmptyInput:
            wp = None
        sharpe, note = _sharpe_or_note(rets, cfg) if len(rets) else (None, "no windows")
        metrics[name] = StrategyMetrics(
            winning_probability=wp,
            n_pairs=sum(1 for sign, _ in pairs if sign != 0),
            annualized_sharpe=sharpe,
            sharpe_note=note,
            returns=rets,
            cumulative=np.cumprod(1.0 + rets) - 1.0 if len(rets) else np.array([]),
        )
    if windows:
        bh = buy_and_hold(panel, target_rows)
        sharpe, note = _sharpe_or_note(bh, cfg)
    else:
        bh, sharpe, note = np.array([]), None, "no windows"
    metrics["buy_and_hold"] = StrategyMetrics(
        winning_probability=None,
        n_pairs=0,
        annualized_sharpe=sharpe,
        sharpe_note=note,
        returns=bh,
        cumulative=np.cumprod(1.0 + bh) - 1.0 if len(bh) else np.array([]),
    )
    return metrics


def diagnostics(report: BacktestReport) -> DiagnosticTables:
    """Time series of k and N plus rank-sorted regime means/variances."""
    if not report.windows:
        raise EmptyReport("backtest produced no successful windows")
    rank_count = min(w.n_states for w in report.windows)
    return DiagnosticTables(
        indices=tuple(w.index for w in report.windows),
        target_dates=tuple(w.target_date for w in report.windows),
        k_series=tuple(w.k for w in report.windows),
        n_states_series=tuple(w.n_states for w in report.windows),
        rank_count=rank_count,
        rank_means=np.vstack(
            [w.sorted_state_means[:rank_count] for w in report.windows]
        ),
        rank_vars=np.vstack(
            [w.sorted_state_vars[:rank_count] for w in report.windows]
        ),
    )


def with_overrides(cfg: BacktestConfig, **kwargs) -> BacktestConfig:
    """Return a copy of the config with the given fields replaced."""
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
