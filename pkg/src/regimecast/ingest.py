"""Price CSV loading, return computation, and per-window completeness.

The CSV contract: UTF-8, header row ``date,<ticker>,...``, ISO-8601
dates, decimal-point numbers, empty cell = missing observation.
Missing values travel through the pipeline as NaN and are never
interpolated; a window only uses assets with a complete history inside
that window.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateDate,
    InsufficientAssets,
    MalformedCsv,
    NonPositivePrice,
    TooFewRows,
    UnsortedDates,
)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PricePanel:
    """T x n closing prices; NaN marks a missing observation."""

    dates: tuple[dt.date, ...]
    assets: tuple[str, ...]
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dates(self.dates)
        if self.prices.shape != (len(self.dates), len(self.assets)):
            raise MalformedCsv(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.assets)} assets"
            )
        present = self.prices[~np.isnan(self.prices)]
        if np.any(present <= 0.0) or np.any(np.isinf(present)):
            raise NonPositivePrice("all present prices must be positive and finite")
        _freeze(self.prices)


@dataclass(frozen=True)
class ReturnsPanel:
    """T x n simple per-period returns; NaN marks a missing observation."""

    dates: tuple[dt.date, ...]
    assets: tuple[str, ...]
    returns: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dates(self.dates)
        if self.returns.shape != (len(self.dates), len(self.assets)):
            raise MalformedCsv(
                f"returns matrix shape {self.returns.shape} does not match "
                f"{len(self.dates)} dates x {len(self.assets)} assets"
            )
        present = self.returns[~np.isnan(self.returns)]
        if np.any(present <= -1.0) or np.any(np.isinf(present)):
            raise MalformedCsv("present returns must be finite and > -1")
        _freeze(self.returns)

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


def _check_dates(dates) -> None:
    for a, b in zip(dates, dates[1:]):
        if b == a:
            raise DuplicateDate(f"date {a.isoformat()} appears more than once")
        if b < a:
            raise UnsortedDates(
                f"dates not strictly increasing: {a.isoformat()} then {b.isoformat()}"
            )


def load_price_csv(path) -> PricePanel:
    """Parse a closing-price CSV into a PricePanel.

    Raises MalformedCsv for structural problems (header, ragged rows,
    unparsable numbers), NonPositivePrice / DuplicateDate /
    UnsortedDates for contract violations.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(f"{path}: file is empty") from None
        if not header or header[0].strip().lower() != "date":
            raise MalformedCsv(f"{path}: first column header must be 'date'")
        assets = tuple(h.strip() for h in header[1:])
        if len(assets) == 0:
            raise MalformedCsv(f"{path}: no asset columns")
        if len(set(assets)) != len(assets):
            raise MalformedCsv(f"{path}: duplicate ticker columns")

        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(assets) + 1:
                raise MalformedCsv(
                    f"{path}:{lineno}: expected {len(assets) + 1} cells, got {len(row)}"
                )
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise MalformedCsv(
                    f"{path}:{lineno}: bad date {row[0]!r} (want YYYY-MM-DD)"
                ) from None
            values = []
            for ticker, cell in zip(assets, row[1:]):
                cell = cell.strip()
                if cell == "":
                    values.append(np.nan)
                    continue
                try:
                    price = float(cell)
                except ValueError:
                    raise MalformedCsv(
                        f"{path}:{lineno}: unparsable price {cell!r} for {ticker}"
                    ) from None
                if not np.isfinite(price) or price <= 0.0:
                    raise NonPositivePrice(
                        f"{path}:{lineno}: non-positive price {cell} for {ticker}"
                    )
                values.append(price)
            dates.append(date)
            rows.append(values)

    if not rows:
        raise MalformedCsv(f"{path}: no data rows")
    return PricePanel(
        dates=tuple(dates), assets=assets, prices=np.array(rows, dtype=np.float64)
    )


def compute_returns(panel: PricePanel) -> ReturnsPanel:
    """Simple returns p_t/p_{t-1} - 1; missing if either price is missing."""
    if len(panel.dates) < 2:
        raise TooFewRows("need at least two price rows to compute returns")
    prices = panel.prices
    with np.errstate(invalid="ignore"):
        rets = prices[1:] / prices[:-1] - 1.0
    return ReturnsPanel(
        dates=panel.dates[1:], assets=panel.assets, returns=rets
    )


def window_view(
    panel: ReturnsPanel, start: int, length: int, min_assets: int = 400
) -> ReturnsPanel:
    """Complete-case slice: rows [start, start+length), columns without NaN.

    The result never contains missing entries. Raises InsufficientAssets
    when fewer than ``min_assets`` columns have a full history inside
    the slice.
    """
    if start < 0 or length < 1 or start + length > panel.n_periods:
        raise TooFewRows(
            f"window [{start}, {start + length}) out of range for "
            f"{panel.n_periods} periods"
        )
    block = panel.returns[start : start + length]
    keep = ~np.isnan(block).any(axis=0)
    n_kept = int(keep.sum())
    if n_kept < min_assets:
        raise InsufficientAssets(
            f"only {n_kept} complete assets in window, need {min_assets}"
        )
    return ReturnsPanel(
        dates=panel.dates[start : start + length],
        assets=tuple(a for a, k in zip(panel.assets, keep) if k),
        returns=block[:, keep].copy(),
    )
