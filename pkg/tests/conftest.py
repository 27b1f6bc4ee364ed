import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from regimecast.ingest import PricePanel, ReturnsPanel

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_CSV = REPO_ROOT / "data" / "synthetic_panel.csv"
FIXTURE_CONFIG = REPO_ROOT / "data" / "fixture_config.json"


def make_returns_panel(values, start=dt.date(2020, 1, 3), assets=None) -> ReturnsPanel:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[1]
    return ReturnsPanel(
        dates=tuple(start + dt.timedelta(weeks=i) for i in range(values.shape[0])),
        assets=tuple(assets) if assets else tuple(f"A{j}" for j in range(n)),
        returns=values,
    )


def make_price_panel(values, start=dt.date(2020, 1, 3), assets=None) -> PricePanel:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[1]
    return PricePanel(
        dates=tuple(start + dt.timedelta(weeks=i) for i in range(values.shape[0])),
        assets=tuple(assets) if assets else tuple(f"A{j}" for j in range(n)),
        prices=values,
    )


@pytest.fixture(scope="session")
def fixture_csv() -> Path:
    assert FIXTURE_CSV.exists(), "bundled synthetic fixture missing"
    return FIXTURE_CSV


@pytest.fixture(scope="session")
def fixture_config() -> Path:
    assert FIXTURE_CONFIG.exists(), "bundled fixture config missing"
    return FIXTURE_CONFIG
