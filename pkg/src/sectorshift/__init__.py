"""Sector-level market-shift estimators, correlation MSTs and portfolio sampling."""

from .data import (
    REFERENCE_SECTORS,
    MissingPolicy,
    PricePanel,
    SectorMap,
    SectorReturnsPanel,
    load_prices,
    load_sector_map,
    sector_returns,
)
from .errors import ComputationError, DegeneratePortfolioError, InputError
from .network import full_correlation, kruskal_mst, export_graph
from .sampling import (
    SampleSpaceSpec,
    compare_spaces,
    composition_report,
    draw_portfolio,
    portfolio_sharpe,
    run_experiment,
)
from .shifts import (
    WindowConfig,
    annotate_threshold,
    c_series,
    rank_series,
    s_series,
    w_series,
    wasserstein_1d,
)

__version__ = "0.1.0"
