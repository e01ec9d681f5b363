"""Monte Carlo sampling of equal-weight portfolios and their Sharpe ratios.

Each draw ``d`` uses its own Philox stream keyed by ``(seed, d)``, so results
do not depend on how draws are spread across workers. Within a draw the asset
set is drawn first and the long/short signs after it; the long-only,
short-only and product-space long-short experiments therefore share their
asset sets for a given seed.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import PricePanel, SectorMap
from .errors import DegeneratePortfolioError, InputError

STYLES = ("long", "short", "longshort")
SCHEMES = ("uniform", "stratified")
LONGSHORT_SPACES = ("product", "union")
QUANTILE_LEVELS = (0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99)
TRADING_DAYS = 252
GFC_PERIOD = (dt.date(2007, 9, 1), dt.date(2009, 3, 31))


def parse_period(text: str | None) -> tuple[dt.date, dt.date] | None:
    """``None``/``full`` -> whole panel, ``gfc`` -> the 2007-09..2009-03 preset, else ``start:end``."""
    if text is None or text == "full":
        return None
    if text == "gfc":
        return GFC_PERIOD
    start, sep, end = text.partition(":")
    try:
        if not sep:
            raise ValueError
        period = dt.date.fromisoformat(start), dt.date.fromisoformat(end)
    except ValueError:
        raise InputError(f"period must be start:end, gfc or full, got {text!r}") from None
    if period[1] < period[0]:
        raise InputError("period ends before it starts")
    return period


@dataclass(frozen=True)
class SampleSpaceSpec:
    style: str = "long"
    size: int = 30
    scheme: str = "uniform"
    draws: int = 10_000
    seed: int = 0
    period: tuple[dt.date, dt.date] | None = None
    longshort_space: str = "product"
    top_fraction: float = 0.01
    days_per_year: int = TRADING_DAYS
    risk_free: float = 0.0

    def __post_init__(self):
        if self.style not in STYLES:
            raise InputError(f"unknown style {self.style!r}")
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown scheme {self.scheme!r}")
        if self.longshort_space not in LONGSHORT_SPACES:
            raise InputError(f"unknown long-short space {self.longshort_space!r}")
        if self.size < 1:
            raise InputError("portfolio size must be at least 1")
        if self.draws < 1:
            raise InputError("draws must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")
        if not 0 < self.top_fraction <= 1:
            raise InputError("top fraction must lie in (0, 1]")

    def validate(self, panel: PricePanel) -> None:
        if self.size > panel.N:
            raise InputError(f"portfolio size {self.size} exceeds the {panel.N} assets")
        if self.period is not None:
            start, end = self.period
            if start > panel.dates[-1] or end < panel.dates[0]:
                raise InputError(f"period {start}..{end} lies outside the panel")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["period"] = None if self.period is None else [p.isoformat() for p in self.period]
        return d


@dataclass(frozen=True, eq=False)
class Portfolio:
    assets: np.ndarray
    signs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.assets)

    @property
    def weights(self) -> np.ndarray:
        return self.signs / self.size


@dataclass(frozen=True, eq=False)
class SharpeInputs:
    mean: np.ndarray  # mean daily log return per asset
    cov: np.ndarray  # sample covariance of daily log returns (ddof = 1)
    risk_free: float = 0.0
    days_per_year: int = TRADING_DAYS

    @classmethod
    def from_panel(cls, panel: PricePanel, risk_free=0.0, days_per_year=TRADING_DAYS) -> "SharpeInputs":
        r = panel.log_returns()
        if r.shape[0] < 2:
            raise InputError("Sharpe inputs need at least two daily returns")
        cov = np.cov(r, rowvar=False, ddof=1).reshape(panel.N, panel.N)
        return cls(r.mean(axis=0), (cov + cov.T) / 2, risk_free, days_per_year)


def selection_weights(sector_map: SectorMap, scheme: str) -> np.ndarray:
    """Single-draw selection weight per asset: 1 (uniform) or 1/(n k_i) (stratified)."""
    if scheme == "uniform":
        return np.ones(sector_map.N)
    if scheme == "stratified":
        k = np.asarray(sector_map.sizes, dtype=float)[sector_map.codes]
        return 1.0 / (sector_map.n * k)
    raise InputError(f"unknown scheme {scheme!r}")


def draw_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def weighted_sample(weights: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` distinct indices by successive weighted selection without replacement.

    Each pick chooses among the remaining items with probability proportional
    to their weights. Implemented with exponential race keys: item ``i`` gets
    ``E_i / w_i`` and the ``m`` smallest keys, in increasing order, have the
    same joint law as the sequential picks.
    """
    keys = rng.standard_exponential(len(weights)) / weights
    return np.argsort(keys, kind="stable")[:m]


def draw_portfolio(spec: SampleSpaceSpec, sector_map: SectorMap, rng: np.random.Generator,
                   weights: np.ndarray | None = None) -> Portfolio:
    m, N = spec.size, sector_map.N
    if m > N:
        raise InputError(f"portfolio size {m} exceeds the {N} assets")
    w = selection_weights(sector_map, spec.scheme) if weights is None else weights
    if spec.style == "longshort" and spec.longshort_space == "union":
        # every asset appears once long and once short
        picks = weighted_sample(np.concatenate([w, w]), m, rng)
        return Portfolio(picks % N, np.where(picks < N, 1, -1))
    assets = weighted_sample(w, m, rng)
    if spec.style == "long":
        signs = np.ones(m, dtype=int)
    elif spec.style == "short":
        signs = -np.ones(m, dtype=int)
    else:
        signs = 2 * rng.integers(0, 2, size=m) - 1
    return Portfolio(assets, signs)


def portfolio_sharpe(p: Portfolio, inputs: SharpeInputs) -> float:
    """Annualised Sharpe ratio of an equal-weight signed portfolio.

    mean daily return * D / (daily volatility * sqrt(D)) with D trading days a year.
    """
    if np.unique(p.assets).size == p.size:
        assets, w = p.assets, p.weights
    else:
        assets, inverse = np.unique(p.assets, return_inverse=True)
        w = np.zeros(assets.size)
        np.add.at(w, inverse, p.weights)
    mean = float(np.sum(w * inputs.mean[assets]))
    var = float(np.sum(inputs.cov[np.ix_(assets, assets)] * np.outer(w, w)))
    if not var > 0:
        raise DegeneratePortfolioError("portfolio has zero variance")
    D = inputs.days_per_year
    return (mean * D - inputs.risk_free) / (math.sqrt(var) * math.sqrt(D))


def compare_spaces(x, y) -> float:
    """P(X > Y) over all cross pairs, ties counting one half. O((|x|+|y|) log |y|)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise InputError("compare_spaces needs two nonempty arrays")
    below = np.searchsorted(y, x, side="left")
    upto = np.searchsorted(y, x, side="right")
    # twice the score, kept in integers so the result is exact
    twice = 2 * int(below.sum()) + int((upto - below).sum())
    return twice / (2 * x.size * y.size)


def composition_report(sharpes, portfolios, top_fraction: float, sector_map: SectorMap,
                       sign_split: bool = False) -> list[dict]:
    """Sector shares of positions among the top ``top_fraction`` portfolios by Sharpe.

    Ties in Sharpe are broken by draw order. ``ratio`` divides a sector's share
    by its share of the asset universe.
    """
    if not 0 < top_fraction <= 1:
        raise InputError("top fraction must lie in (0, 1]")
    sharpes = np.asarray(sharpes, dtype=float)
    count = max(1, math.ceil(round(len(sharpes) * top_fraction, 9)))
    order = np.lexsort((np.arange(len(sharpes)), -sharpes))[:count]
    chosen = [portfolios[k] for k in order]
    codes = np.concatenate([sector_map.codes[p.assets] for p in chosen])
    signs = np.concatenate([p.signs for p in chosen])
    total = codes.size
    n = sector_map.n
    counts = np.bincount(codes, minlength=n)
    longs = np.bincount(codes[signs > 0], minlength=n)
    rows = []
    for i, sector in enumerate(sector_map.sectors):
        raw = 100.0 * counts[i] / total
        row = {"sector": sector, "raw_pct": raw,
               "ratio": raw / (100.0 * sector_map.sizes[i] / sector_map.N)}
        if sign_split:
            row["long_pct"] = 100.0 * longs[i] / total
            row["short_pct"] = 100.0 * (counts[i] - longs[i]) / total
        rows.append(row)
    return rows


def extremes(rows: list[dict], key: str, k: int = 5) -> dict:
    ranked = sorted(range(len(rows)), key=lambda i: (-rows[i][key], i))
    return {
        "top": [rows[i]["sector"] for i in ranked[:k]],
        "bottom": [rows[i]["sector"] for i in ranked[::-1][:k]],
    }


@dataclass(eq=False)
class SamplingReport:
    spec: SampleSpaceSpec
    quantiles: dict[float, float]
    composition: list[dict]
    sharpe: np.ndarray
    portfolios: list[Portfolio] = field(repr=False, default_factory=list)
    comparisons: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "quantiles": {f"{q:.2f}": v for q, v in self.quantiles.items()},
            "composition": self.composition,
            "comparisons": self.comparisons,
            "extremes": {
                "raw_pct": extremes(self.composition, "raw_pct"),
                "ratio": extremes(self.composition, "ratio"),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def sharpe_quantiles(sharpes) -> dict[float, float]:
    vals = np.quantile(np.asarray(sharpes, dtype=float), QUANTILE_LEVELS, method="linear")
    return {q: float(v) for q, v in zip(QUANTILE_LEVELS, vals)}


def sample_sharpes(spec: SampleSpaceSpec, sector_map: SectorMap, inputs: SharpeInputs,
                   threads: int = 1) -> tuple[np.ndarray, list[Portfolio]]:
    """Draw ``spec.draws`` portfolios and score them, in draw order."""
    weights = selection_weights(sector_map, spec.scheme)

    def work(indices):
        out = []
        for d in indices:
            p = draw_portfolio(spec, sector_map, draw_stream(spec.seed, int(d)), weights)
            out.append((p, portfolio_sharpe(p, inputs)))
        return out

    idx = np.arange(spec.draws)
    if threads <= 1 or spec.draws < 2 * threads:
        results = work(idx)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = [r for part in pool.map(work, np.array_split(idx, threads)) for r in part]
    portfolios = [p for p, _ in results]
    return np.array([s for _, s in results]), portfolios


def run_experiment(spec: SampleSpaceSpec, panel: PricePanel, sector_map: SectorMap,
                   threads: int = 1, sign_split: bool = False) -> SamplingReport:
    """Sample, score and summarise one sample space over its period."""
    spec.validate(panel)
    if spec.period is not None:
        panel = panel.restrict(*spec.period)
    inputs = SharpeInputs.from_panel(panel, spec.risk_free, spec.days_per_year)
    sharpes, portfolios = sample_sharpes(spec, sector_map, inputs, threads)
    composition = composition_report(sharpes, portfolios, spec.top_fraction, sector_map, sign_split)
    return SamplingReport(spec, sharpe_quantiles(sharpes), composition, sharpes, portfolios)
