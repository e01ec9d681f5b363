"""Synthetic price panels with market and sector factors, for tests and demos."""
from __future__ import annotations

import numpy as np
import pandas as pd

from .data import REFERENCE_SECTORS, PricePanel, SectorMap


def spread_sizes(N: int, n: int) -> list[int]:
    """Split ``N`` assets over ``n`` sectors as evenly as possible (larger sectors first)."""
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    base, extra = divmod(N, n)
    return [base + 1] * extra + [base] * (n - extra)


def sector_names(n: int) -> list[str]:
    if n == len(REFERENCE_SECTORS):
        return list(REFERENCE_SECTORS)
    return [f"Sector {k + 1:02d}" for k in range(n)]


def make_sector_map(sizes, tickers=None, names=None) -> SectorMap:
    N = int(sum(sizes))
    tickers = tickers or [f"A{i:04d}" for i in range(N)]
    names = names or sector_names(len(sizes))
    codes = np.repeat(np.arange(len(sizes)), sizes)
    return SectorMap.from_assignments(tickers, {t: names[c] for t, c in zip(tickers, codes)})


def make_panel(
    T: int = 4780,
    sizes=None,
    seed: int = 0,
    start: str = "2005-01-03",
    market_vol: float = 0.010,
    sector_vol: float = 0.006,
    idio_vol: float = 0.015,
    drift: float = 2e-4,
    sector_drift=None,
) -> tuple[PricePanel, SectorMap]:
    """Prices for days 0..T from a one-market, one-factor-per-sector model.

    ``sector_drift`` optionally overrides the daily drift per sector.
    """
    sizes = list(sizes) if sizes is not None else spread_sizes(268, 60)
    rng = np.random.default_rng(seed)
    n, N = len(sizes), int(sum(sizes))
    codes = np.repeat(np.arange(n), sizes)
    mu = np.full(n, drift) if sector_drift is None else np.asarray(sector_drift, dtype=float)
    market = rng.normal(0.0, market_vol, size=(T, 1))
    sector = rng.normal(0.0, sector_vol, size=(T, n))
    beta = rng.uniform(0.6, 1.4, size=N)
    idio = rng.normal(0.0, idio_vol, size=(T, N))
    logret = mu[codes] + beta * market + sector[:, codes] + idio
    start_price = rng.uniform(10.0, 200.0, size=N)
    logp = np.vstack([np.zeros(N), np.cumsum(logret, axis=0)]) + np.log(start_price)
    dates = tuple(d.date() for d in pd.bdate_range(start, periods=T + 1))
    smap = make_sector_map(sizes)
    panel = PricePanel(dates=dates, tickers=tuple(smap.assignments), prices=np.exp(logp))
    return panel, smap
