import datetime as dt

import numpy as np
import pytest

from regimecast.backtest import (
    BacktestConfig,
    annualized_sharpe,
    buy_and_hold,
    diagnostics,
    run_backtest,
    strategy_positions,
    winning_probability,
)
from regimecast.errors import (
    EmptyInput,
    EmptyReport,
    InsufficientHistory,
    NoPositions,
    TooShort,
    ZeroVolatility,
)
from regimecast.forecast import ForecastRecord, make_forecast
from regimecast.hmm import select_model
from regimecast.ingest import window_view
from regimecast.pca import factor_returns, fit_factor_model, normalize
from regimecast.synthetic import make_regime_market, RegimeMarketSpec

from conftest import make_returns_panel


def record_with_signs(raw_signs, norm_signs=None) -> ForecastRecord:
    raw = np.asarray(raw_signs, dtype=np.int64)
    norm = raw if norm_signs is None else np.asarray(norm_signs, dtype=np.int64)
    n = raw.size
    return ForecastRecord(
        date=dt.date(2021, 1, 8),
        current_state=0,
        factor_forecast=np.zeros(1),
        normalized_forecast=norm.astype(float) * 0.1,
        raw_forecast=raw.astype(float) * 0.1,
        signs_raw=raw,
        signs_normalized=norm,
    )


def small_cfg(**kw) -> BacktestConfig:
    base = dict(
        window_length=60,
        horizon=4,
        p=0.3,
        min_assets=3,
        state_candidates=(2, 3),
        em_max_iter=50,
    )
    base.update(kw)
    return BacktestConfig(**base)


# --- positions ---

def test_equal_weight_long_short():
    rec = record_with_signs([1, 1, -1, 1])
    assert np.array_equal(strategy_positions(1, rec), [0.25, 0.25, -0.25, 0.25])


def test_all_positive_signs_long_only():
    rec = record_with_signs([1, 1, 1])
    w = strategy_positions(1, rec)
    assert np.array_equal(w, np.full(3, 1.0 / 3.0))
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_zero_signs_get_zero_weight():
    rec = record_with_signs([1, 0, -1, 0])
    assert np.array_equal(strategy_positions(1, rec), [0.5, 0.0, -0.5, 0.0])


def test_no_positions():
    with pytest.raises(NoPositions):
        strategy_positions(1, record_with_signs([0, 0, 0]))


def test_strategies_differ_on_sign_disagreement():
    rec = record_with_signs([1, 1, -1], norm_signs=[-1, 1, -1])
    w1 = strategy_positions(1, rec)
    w2 = strategy_positions(2, rec)
    assert not np.array_equal(w1, w2)


# --- winning probability ---

def test_winning_probability_two_of_three():
    pairs = [(1, 0.01), (1, -0.02), (1, 0.03)]
    assert winning_probability(pairs) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_winning_probability_perfect():
    pairs = [(1, 0.01), (-1, -0.5), (1, 2.0)]
    assert winning_probability(pairs) == 1.0


def test_zero_signs_leave_denominator():
    pairs = [(0, 0.01), (1, 0.02)]
    assert winning_probability(pairs) == 1.0


def test_zero_realized_counts_as_miss():
    pairs = [(1, 0.0), (1, 0.01)]
    assert winning_probability(pairs) == pytest.approx(0.5, abs=1e-15)


def test_winning_probability_empty():
    with pytest.raises(EmptyInput):
        winning_probability([])
    with pytest.raises(EmptyInput):
        winning_probability([(0, 0.01)])


def test_coin_flip_signs_near_half():
    rng = np.random.default_rng(30)
    m = 40_000
    signs = rng.choice([-1, 1], size=m)
    realized = rng.normal(0.0, 0.02, size=m)
    wp = winning_probability(list(zip(signs, realized)))
    assert abs(wp - 0.5) <= 3.0 / (2.0 * np.sqrt(m))


# --- sharpe ---

def test_sharpe_hand_computed():
    # mean 0.02, sample std 0.01 -> 2 * sqrt(52)
    got = annualized_sharpe([0.01, 0.03, 0.02], periods_per_year=52)
    assert got == pytest.approx(14.422205101855956, abs=1e-12)


def test_sharpe_with_risk_free():
    got = annualized_sharpe([0.01, 0.03, 0.02], periods_per_year=52, rf=0.02)
    assert got == pytest.approx(0.0, abs=1e-12)


def test_sharpe_zero_volatility():
    with pytest.raises(ZeroVolatility):
        annualized_sharpe([0.01, 0.01, 0.01], 52)


def test_sharpe_too_short():
    with pytest.raises(TooShort):
        annualized_sharpe([0.01], 52)


# --- buy and hold ---

def test_buy_and_hold_equal_weight_mean():
    panel = make_returns_panel([[0.02, 0.0], [0.05, 0.01]])
    assert buy_and_hold(panel, [0, 1]) == pytest.approx([0.01, 0.03], abs=1e-15)


def test_buy_and_hold_single_asset():
    panel = make_returns_panel([[0.02], [0.03]])
    assert np.array_equal(buy_and_hold(panel, [0, 1]), [0.02, 0.03])


def test_buy_and_hold_skips_missing():
    panel = make_returns_panel([[0.02, np.nan]])
    assert buy_and_hold(panel, [0]) == pytest.approx([0.02])


# --- engine ---

@pytest.fixture(scope="module")
def market():
    spec = RegimeMarketSpec(n_assets=8, n_periods=100)
    panel, truth = make_regime_market(seed=7, spec=spec)
    return panel, truth


def test_single_window_matches_manual_pipeline(market):
    panel, _ = market
    cfg = small_cfg(horizon=1)
    report = run_backtest(panel, cfg)
    assert len(report.windows) == 1
    w = report.windows[0]

    window = window_view(panel, 0, cfg.window_length, cfg.min_assets)
    y, stats = normalize(window)
    fmodel = fit_factor_model(y, cfg.p, stats)
    fpanel = factor_returns(y, fmodel, dates=window.dates)
    fit, _ = select_model(
        fpanel.values, candidates=cfg.state_candidates,
        tol=cfg.em_tol, max_iter=cfg.em_max_iter, aic_penalty=cfg.aic_penalty,
    )
    record = make_forecast(fit, fpanel, fmodel, panel.dates[cfg.window_length])

    assert w.k == fmodel.k
    assert w.n_states == fit.model.n_states
    assert np.array_equal(w.forecast.raw_forecast, record.raw_forecast)
    assert np.array_equal(w.realized, panel.returns[cfg.window_length])
    assert w.target_date == panel.dates[cfg.window_length]


def test_report_is_deterministic(market):
    panel, _ = market
    cfg = small_cfg()
    a = run_backtest(panel, cfg)
    b = run_backtest(panel, cfg)
    assert len(a.windows) == len(b.windows)
    for wa, wb in zip(a.windows, b.windows):
        assert np.array_equal(wa.forecast.raw_forecast, wb.forecast.raw_forecast)
        assert wa.strategy_returns == wb.strategy_returns
    for name in ("strategy_1", "strategy_2", "buy_and_hold"):
        assert np.array_equal(a.metrics[name].returns, b.metrics[name].returns)
        assert a.metrics[name].winning_probability == b.metrics[name].winning_probability


def test_parallel_equals_sequential(market):
    panel, _ = market
    seq = run_backtest(panel, small_cfg())
    par = run_backtest(panel, small_cfg(workers=2))
    for wa, wb in zip(seq.windows, par.windows):
        assert np.array_equal(wa.forecast.raw_forecast, wb.forecast.raw_forecast)
        assert np.array_equal(wa.realized, wb.realized)
        assert wa.strategy_returns == wb.strategy_returns


def test_portfolio_accounting(market):
    panel, _ = market
    report = run_backtest(panel, small_cfg())
    for w in report.windows:
        realized = np.where(np.isnan(w.realized), 0.0, w.realized)
        for strat, name in ((1, "strategy_1"), (2, "strategy_2")):
            try:
                weights = strategy_positions(strat, w.forecast)
            except NoPositions:
                assert w.strategy_returns[name] == 0.0
                continue
            assert w.strategy_returns[name] == pytest.approx(
                float(weights @ realized), abs=1e-12
            )


def test_no_lookahead(market):
    panel, _ = market
    cfg = small_cfg()
    report = run_backtest(panel, cfg)
    for w in report.windows:
        window_dates = panel.dates[w.index : w.index + cfg.window_length]
        assert max(window_dates) < w.target_date


def test_insufficient_history(market):
    panel, _ = market
    with pytest.raises(InsufficientHistory):
        run_backtest(panel, small_cfg(horizon=200))


def test_window_failures_recorded_not_fatal(market):
    panel, _ = market
    values = panel.returns.copy()
    # poke holes in the first fitting window so it drops below min_assets
    values[10, :6] = np.nan
    poked = make_returns_panel(values, start=panel.dates[0], assets=panel.assets)
    report = run_backtest(poked, small_cfg(min_assets=4))
    assert len(report.skipped) >= 1
    assert "InsufficientAssets" in report.skipped[0].reason
    assert len(report.windows) + len(report.skipped) == 4


def test_sorted_state_diagnostics(market):
    panel, _ = market
    report = run_backtest(panel, small_cfg())
    for w in report.windows:
        assert np.all(np.diff(w.sorted_state_means) <= 0.0)
        assert w.sorted_state_means.size == w.n_states
        assert np.all(w.sorted_state_vars > 0.0)


def test_diagnostics_tables(market):
    panel, _ = market
    report = run_backtest(panel, small_cfg())
    tables = diagnostics(report)
    assert tables.rank_count == min(w.n_states for w in report.windows)
    assert tables.rank_means.shape == (len(report.windows), tables.rank_count)
    assert tables.k_series == tuple(w.k for w in report.windows)


def test_diagnostics_single_window(market):
    panel, _ = market
    report = run_backtest(panel, small_cfg(horizon=1))
    tables = diagnostics(report)
    assert len(tables.indices) == 1
    assert tables.rank_means.shape[0] == 1


def test_diagnostics_empty_report(market):
    panel, _ = market
    cfg = small_cfg(min_assets=9)  # more than the panel has -> all skipped
    report = run_backtest(panel, cfg)
    assert not report.windows
    with pytest.raises(EmptyReport):
        diagnostics(report)


def test_config_validation():
    with pytest.raises(ValueError):
        BacktestConfig(window_length=2)
    with pytest.raises(ValueError):
        BacktestConfig(horizon=0)
    with pytest.raises(ValueError):
        BacktestConfig(p=1.0)
    with pytest.raises(ValueError):
        BacktestConfig(workers=0)
