"""Price panel and sector map ingestion, plus averaged sector log returns."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InputError

log = logging.getLogger(__name__)

# 60-sector reference vocabulary. Shipped for convenience; sector files may use any names.
REFERENCE_SECTORS: tuple[str, ...] = (
    "Advertising",
    "Aerospace defence",
    "Agriculture",
    "Alcoholic beverages",
    "Asset management",
    "Auto manufacturers",
    "Banks - diversified",
    "Biotechnology",
    "Building products & equipment",
    "Capital markets",
    "Casinos",
    "Communications",
    "Computer hardware",
    "Conglomerates",
    "Consumer electronics",
    "Credit",
    "Department stores",
    "Diagnostics research",
    "Discount stores",
    "Drug manufacturers",
    "Electrical equipment",
    "Entertainment",
    "Farming heavy construction",
    "Footwear & accessories",
    "Gambling",
    "Gaming",
    "Gold",
    "Healthcare plans",
    "Home improvement retail",
    "Household",
    "Industrial metals mining",
    "Information technologies",
    "Insurance",
    "Internet",
    "Internet retail",
    "Leisure",
    "Lodging",
    "Medical devices",
    "Medical distribution",
    "Medical instruments supplies",
    "Non-alcoholic beverages",
    "Oil & Gas",
    "Packaged foods",
    "Packaging containers",
    "Publishing",
    "REIT",
    "Railroads",
    "Real estate",
    "Restaurants",
    "Retail",
    "Scientific instruments",
    "Semiconductors",
    "Software applications",
    "Software infrastructure",
    "Special industrial machinery",
    "Specialty chemicals",
    "Telecom",
    "Tobacco",
    "Utilities",
    "Waste management",
)


@dataclass(frozen=True)
class MissingPolicy:
    """How gaps in the price CSV are handled.

    ``forward-fill`` carries the last close over runs of at most ``max_gap``
    missing days; an asset with a longer run is dropped (or rejected when
    ``strict``). ``drop`` fills nothing. Either way, dates that still have a
    missing price afterwards are removed panel-wide.
    """

    kind: str = "forward-fill"
    max_gap: int = 5
    strict: bool = False

    def __post_init__(self):
        if self.kind not in ("forward-fill", "drop"):
            raise InputError(f"unknown missing-data policy {self.kind!r}")
        if self.max_gap < 0:
            raise InputError("max gap must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "MissingPolicy":
        """Parse ``forward-fill:<maxgap>``, ``forward-fill`` or ``drop``."""
        kind, _, gap = text.partition(":")
        if kind == "drop":
            if gap:
                raise InputError("the drop policy takes no argument")
            return cls(kind="drop")
        if kind != "forward-fill":
            raise InputError(f"unknown missing-data policy {text!r}")
        if not gap:
            return cls()
        try:
            return cls(max_gap=int(gap))
        except ValueError:
            raise InputError(f"bad max gap in {text!r}") from None

    def __str__(self):
        return "drop" if self.kind == "drop" else f"forward-fill:{self.max_gap}"


@dataclass(frozen=True, eq=False)
class PricePanel:
    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray
    audit: dict = field(default_factory=dict)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape != (len(self.dates), len(self.tickers)):
            raise InputError(
                f"price matrix shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(self.dates) < 2:
            raise InputError("a price panel needs at least two dates")
        if len(set(self.tickers)) != len(self.tickers):
            raise InputError("duplicate ticker column")
        if not np.all(np.isfinite(prices)):
            raise InputError("price panel contains missing or non-finite values")
        if np.any(prices <= 0):
            raise InputError("non-positive price in panel")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise InputError(f"dates not strictly increasing at {b}")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    @property
    def T(self) -> int:
        """Index of the last trading day (days are numbered 0..T)."""
        return len(self.dates) - 1

    @property
    def N(self) -> int:
        return len(self.tickers)

    def log_returns(self) -> np.ndarray:
        """Daily log returns, shape ``(T, N)``; row ``t-1`` holds day ``t``."""
        return np.log(self.prices[1:] / self.prices[:-1])

    def restrict(self, start: dt.date | None = None, end: dt.date | None = None) -> "PricePanel":
        """Sub-panel of the dates falling inside ``[start, end]``."""
        keep = [
            i
            for i, d in enumerate(self.dates)
            if (start is None or d >= start) and (end is None or d <= end)
        ]
        if len(keep) < 2:
            raise InputError(f"period {start}..{end} holds fewer than two trading days")
        if len(keep) == len(self.dates):
            return self
        return PricePanel(
            dates=tuple(self.dates[i] for i in keep),
            tickers=self.tickers,
            prices=self.prices[keep],
            audit=dict(self.audit),
        )


@dataclass(frozen=True, eq=False)
class SectorMap:
    assignments: dict[str, str]
    sectors: tuple[str, ...]
    sizes: tuple[int, ...]
    # sector index of every panel ticker, aligned with PricePanel.tickers
    codes: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sectors)

    @property
    def N(self) -> int:
        return len(self.codes)

    @classmethod
    def from_assignments(cls, tickers, assignments: dict[str, str]) -> "SectorMap":
        """Build the map for ``tickers``; sectors keep their first-seen order."""
        missing = [t for t in tickers if t not in assignments]
        if missing:
            raise InputError(f"unmapped ticker(s): {', '.join(missing[:10])}")
        order: dict[str, int] = {}
        for sector in assignments.values():
            order.setdefault(sector, len(order))
        used = sorted({assignments[t] for t in tickers}, key=order.__getitem__)
        index = {s: i for i, s in enumerate(used)}
        codes = np.array([index[assignments[t]] for t in tickers], dtype=np.intp)
        sizes = tuple(int(c) for c in np.bincount(codes, minlength=len(used)))
        codes.setflags(write=False)
        return cls(
            assignments={t: assignments[t] for t in tickers},
            sectors=tuple(used),
            sizes=sizes,
            codes=codes,
        )


@dataclass(frozen=True, eq=False)
class SectorReturnsPanel:
    dates: tuple[dt.date, ...]
    sectors: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.shape != (len(self.dates), len(self.sectors)):
            raise InputError("sector returns shape does not match dates x sectors")
        if not np.all(np.isfinite(r)):
            raise InputError("sector returns contain non-finite values")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def n(self) -> int:
        return self.returns.shape[1]


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"malformed CSV: {text!r} is not an ISO-8601 date") from None


def _longest_inner_gaps(missing: np.ndarray) -> np.ndarray:
    """Longest run of missing values after each column's first observation."""
    T, N = missing.shape
    out = np.zeros(N, dtype=int)
    for j in range(N):
        col = missing[:, j]
        seen = np.flatnonzero(~col)
        if seen.size == 0:
            out[j] = T
            continue
        run = best = 0
        for v in col[seen[0]:]:
            run = run + 1 if v else 0
            best = max(best, run)
        out[j] = best
    return out


def load_prices(path, policy: MissingPolicy | None = None) -> PricePanel:
    """Read a ``date,<ticker>,...`` CSV of daily closes into a dense panel.

    The returned panel carries an ``audit`` dict with the number of filled
    cells, dropped tickers and dropped dates.
    """
    policy = policy or MissingPolicy()
    path = Path(path)
    if not path.is_file():
        raise InputError(f"price file not found: {path}")
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), [])
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"malformed CSV {path}: {exc}") from None
    if len(header) < 2 or header[0].strip().lower() != "date" or frame.shape[1] != len(header):
        raise InputError("malformed CSV: header must be date,<ticker1>,...")
    tickers = [c.strip() for c in header[1:]]
    if len(set(tickers)) != len(tickers):
        raise InputError("malformed CSV: duplicate ticker column")

    dates = [_parse_date(d) for d in frame.iloc[:, 0]]
    seen: set[dt.date] = set()
    for d in dates:
        if d in seen:
            raise InputError(f"duplicate date {d}")
        seen.add(d)
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise InputError("malformed CSV: dates must be in increasing order")

    cells = frame.iloc[:, 1:].apply(lambda s: s.str.strip())
    values = cells.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = np.isnan(values) & (cells.to_numpy() != "")
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InputError(f"malformed CSV: non-numeric price {cells.iat[r, c]!r} for {tickers[c]}")
    if np.any(values[np.isfinite(values)] <= 0):
        r, c = np.argwhere(values <= 0)[0]
        raise InputError(f"non-positive price {values[r, c]} for {tickers[c]} on {dates[r]}")
    if np.any(np.isinf(values)):
        raise InputError("malformed CSV: infinite price")

    missing = np.isnan(values)
    audit = {"filled_cells": 0, "dropped_tickers": [], "dropped_dates": 0}
    if policy.kind == "forward-fill" and missing.any():
        gaps = _longest_inner_gaps(missing)
        too_long = [t for t, g in zip(tickers, gaps) if g > policy.max_gap]
        if too_long and policy.strict:
            raise InputError(
                f"ticker(s) with more than {policy.max_gap} consecutive missing values: "
                + ", ".join(too_long)
            )
        keep = gaps <= policy.max_gap
        for t in too_long:
            log.warning("dropping %s: gap longer than %d days", t, policy.max_gap)
        audit["dropped_tickers"] = too_long
        tickers = [t for t, k in zip(tickers, keep) if k]
        values = values[:, keep]
        filled = pd.DataFrame(values).ffill().to_numpy()
        audit["filled_cells"] = int(np.isnan(values).sum() - np.isnan(filled).sum())
        values = filled

    complete = ~np.isnan(values).any(axis=1)
    audit["dropped_dates"] = int((~complete).sum())
    if audit["dropped_dates"]:
        log.info("dropping %d incomplete dates", audit["dropped_dates"])
    if not tickers:
        raise InputError("no tickers left after applying the missing-data policy")
    values = values[complete]
    dates = [d for d, k in zip(dates, complete) if k]
    log.info(
        "loaded %d dates x %d tickers (%d cells filled, %d tickers dropped)",
        len(dates), len(tickers), audit["filled_cells"], len(audit["dropped_tickers"]),
    )
    return PricePanel(dates=tuple(dates), tickers=tuple(tickers), prices=values, audit=audit)


def load_sector_map(path, panel: PricePanel) -> SectorMap:
    """Read a ``ticker,sector`` CSV and align it with the panel's tickers.

    Map rows for tickers absent from the panel are ignored, so assets dropped
    by the missing-data policy need no edits to the sector file.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"sector file not found: {path}")
    assignments: dict[str, str] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["ticker", "sector"]:
            raise InputError("malformed sector CSV: header must be ticker,sector")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"malformed sector CSV line {lineno}: expected 2 fields")
            ticker, sector = row[0].strip(), row[1].strip()
            if not ticker or not sector:
                raise InputError(f"malformed sector CSV line {lineno}: empty field")
            if ticker in assignments:
                raise InputError(f"ticker {ticker} mapped twice")
            assignments[ticker] = sector
    return SectorMap.from_assignments(panel.tickers, assignments)


def sector_returns(panel: PricePanel, sector_map: SectorMap) -> SectorReturnsPanel:
    """Equal-weighted average of constituent daily log returns per sector."""
    if sector_map.N != panel.N:
        raise InputError("sector map does not match the panel's tickers")
    logret = panel.log_returns()
    member = np.zeros((panel.N, sector_map.n))
    member[np.arange(panel.N), sector_map.codes] = 1.0
    sums = logret @ member
    return SectorReturnsPanel(
        dates=panel.dates[1:],
        sectors=sector_map.sectors,
        returns=sums / np.asarray(sector_map.sizes, dtype=float),
    )


def write_prices(path, panel: PricePanel) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.prices):
            w.writerow([d.isoformat(), *(repr(float(x)) for x in row)])


def write_sector_map(path, sector_map: SectorMap) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ticker", "sector"])
        for ticker, sector in sector_map.assignments.items():
            w.writerow([ticker, sector])
