import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sectorshift import data, synthetic  # noqa: E402

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def write_csv(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def small_panel():
    return synthetic.make_panel(T=200, sizes=[3, 2, 4, 1, 2], seed=11)


@pytest.fixture
def small_returns(small_panel):
    panel, smap = small_panel
    return data.sector_returns(panel, smap)


@pytest.fixture
def panel_files(tmp_path, small_panel):
    panel, smap = small_panel
    prices, sectors = tmp_path / "prices.csv", tmp_path / "sectors.csv"
    data.write_prices(prices, panel)
    data.write_sector_map(sectors, smap)
    return prices, sectors


def returns_panel(R, sectors=None):
    """SectorReturnsPanel around a raw T x n array with placeholder dates."""
    import datetime as dt

    R = np.atleast_2d(np.asarray(R, dtype=float))
    dates = tuple(dt.date(2020, 1, 1) + dt.timedelta(days=k) for k in range(R.shape[0]))
    sectors = sectors or tuple(f"s{j}" for j in range(R.shape[1]))
    return data.SectorReturnsPanel(dates=dates, sectors=tuple(sectors), returns=R)
