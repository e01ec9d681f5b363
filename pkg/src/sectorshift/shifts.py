"""Rolling market-shift estimators over averaged sector returns.

Day ``t`` of the returns panel lives in row ``t - 1``. Every estimator compares
the window ``[t - tau + 1, t]`` with ``[t + 1, t + tau]`` and is defined for
``t = tau .. T - tau``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc
from scipy.stats import rankdata

from .data import SectorReturnsPanel
from .errors import ComputationError, InputError

log = logging.getLogger(__name__)

MEASURES = ("s", "w", "c", "kendall", "spearman", "pearson")
_RANK_KINDS = {"kendall": "KendallTau", "spearman": "Spearman", "pearson": "Pearson"}


@dataclass(frozen=True)
class WindowConfig:
    tau: int = 30

    def check(self, T: int) -> None:
        if self.tau < 1 or 2 * self.tau > T:
            raise InputError(f"window length {self.tau} needs 1 <= tau <= T/2 (T = {T})")

    def t_index(self, T: int) -> np.ndarray:
        self.check(T)
        return np.arange(self.tau, T - self.tau + 1)


@dataclass(frozen=True, eq=False)
class ShiftSeries:
    name: str
    t_index: np.ndarray
    values: np.ndarray
    dates: tuple = ()
    threshold: float | None = None
    breaches: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    pvalues: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def pvalue_series(self) -> "ShiftSeries":
        if self.pvalues is None:
            raise ValueError(f"{self.name} carries no p-values")
        return ShiftSeries("KendallPValue", self.t_index, self.pvalues, self.dates)

    def breach_mask(self) -> np.ndarray:
        return np.isin(self.t_index, self.breaches)


def _ordered_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    # Left-to-right accumulation; numpy's pairwise reduction would make results
    # depend on array layout.
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    acc = a[0].copy()
    for k in range(1, a.shape[0]):
        acc += a[k]
    return acc


def _sweep(fn, ts: np.ndarray, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn`` on contiguous chunks of ``ts`` and stitch in index order."""
    if threads <= 1 or len(ts) < 2 * threads:
        return fn(ts)
    chunks = np.array_split(ts, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts)


def _window_sums(R: np.ndarray, tau: int, ends: np.ndarray) -> np.ndarray:
    """Sums of rows ``end - tau + 1 .. end`` (day indices) for each end."""
    ends = np.asarray(ends)
    acc = np.zeros((len(ends), R.shape[1]))
    for k in range(tau):
        acc += R[ends - tau + k]
    return acc


def monthly_sums(returns: SectorReturnsPanel, cfg: WindowConfig, t: int) -> np.ndarray:
    """Per-sector sum of the ``tau`` daily returns ending at day ``t``."""
    if not cfg.tau <= t <= returns.T:
        raise InputError(f"day {t} outside {cfg.tau}..{returns.T}")
    return _window_sums(returns.returns, cfg.tau, np.array([t]))[0]


def _series(name, returns, ts, values, **kw) -> ShiftSeries:
    dates = tuple(returns.dates[t - 1] for t in ts)
    return ShiftSeries(name=name, t_index=ts, values=values, dates=dates, **kw)


def s_series(returns: SectorReturnsPanel, cfg: WindowConfig = WindowConfig(), threads: int = 1) -> ShiftSeries:
    """L1 distance between adjacent monthly sector-sum vectors."""
    ts = cfg.t_index(returns.T)
    R, tau = returns.returns, cfg.tau

    def chunk(t):
        diff = np.abs(_window_sums(R, tau, t) - _window_sums(R, tau, t + tau))
        return _ordered_sum(diff, axis=1)

    return _series("S", returns, ts, _sweep(chunk, ts, threads))


def _as_samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InputError("empty distribution")
    if not np.all(np.isfinite(x)):
        raise InputError("distribution samples must be finite")
    return x


def wasserstein_1d(a, b) -> float:
    """L1 Wasserstein distance between two empirical distributions.

    Integrates the absolute difference of the two step quantile functions
    exactly. The quantile functions jump at multiples of ``1/len(a)`` and
    ``1/len(b)``; on the common refinement both are constant, so the integral
    is a finite weighted sum. Equal sample counts reduce to the mean absolute
    difference of the sorted samples.
    """
    x, y = np.sort(_as_samples(a)), np.sort(_as_samples(b))
    n, m = len(x), len(y)
    if n == m:
        return float(_ordered_sum(np.abs(x - y)) / n)
    # breakpoints on the integer grid 0..n*m (x jumps every m, y every n)
    grid = np.union1d(np.arange(0, n * m + 1, m), np.arange(0, n * m + 1, n))
    left = grid[:-1]
    widths = np.diff(grid)
    gaps = np.abs(x[left // m] - y[left // n])
    return float(_ordered_sum(gaps * widths) / (n * m))


def w_series(returns: SectorReturnsPanel, cfg: WindowConfig = WindowConfig(), threads: int = 1) -> ShiftSeries:
    """Sum over sectors of the Wasserstein distance between adjacent windows."""
    ts = cfg.t_index(returns.T)
    R, tau = returns.returns, cfg.tau

    def sorted_windows(ends):
        # shape (len(ends), tau, n), sorted along the window axis
        rows = ends[:, None] - tau + np.arange(tau)[None, :]
        return np.sort(R[rows], axis=1)

    def chunk(t):
        before, after = sorted_windows(t), sorted_windows(t + tau)
        per_sector = _ordered_sum(np.abs(before - after), axis=1) / tau
        return _ordered_sum(per_sector, axis=1)

    return _series("W", returns, ts, _sweep(chunk, ts, threads))


def _pearson_matrix(X: np.ndarray) -> tuple[np.ndarray, int]:
    """Column correlation matrix; constant columns correlate 0 with the rest."""
    Xc = X - X.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    flat = np.ptp(X, axis=0) == 0
    safe = np.where(flat, 1.0, norms)
    U = Xc / safe
    psi = U.T @ U
    psi = (psi + psi.T) / 2
    psi[flat, :] = 0.0
    psi[:, flat] = 0.0
    np.clip(psi, -1.0, 1.0, out=psi)
    np.fill_diagonal(psi, 1.0)
    return psi, int(flat.sum())


def rolling_correlation(returns: SectorReturnsPanel, cfg: WindowConfig, t: int) -> np.ndarray:
    """Pearson correlation of sector returns over days ``t - tau + 1 .. t + tau``.

    A sector with zero variance inside the window gets correlation 0 with
    every other sector (its diagonal entry stays 1) and a warning is logged.
    """
    tau = cfg.tau
    if not tau <= t <= returns.T - tau:
        raise InputError(f"day {t} outside {tau}..{returns.T - tau}")
    psi, flat = _pearson_matrix(returns.returns[t - tau:t + tau])
    if flat:
        log.warning("day %d: %d zero-variance sector(s) in correlation window", t, flat)
    return psi


def leading_eigenvalue(psi: np.ndarray) -> tuple[float, float]:
    """Largest eigenvalue of a symmetric matrix and the spectrum's sum."""
    try:
        eig = np.linalg.eigvalsh(psi)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"eigen-solver failed: {exc}") from exc
    return float(eig[-1]), float(eig.sum())


def c_series(returns: SectorReturnsPanel, cfg: WindowConfig = WindowConfig(), threads: int = 1) -> ShiftSeries:
    """Leading eigenvalue of the rolling 2*tau-day correlation matrix over n."""
    ts = cfg.t_index(returns.T)
    R, tau, n = returns.returns, cfg.tau, returns.n
    flat_days: list[int] = []
    trace_err: list[float] = []

    def chunk(t):
        out = np.empty(len(t))
        for k, day in enumerate(t):
            psi, flat = _pearson_matrix(R[day - tau:day + tau])
            if flat:
                flat_days.append(int(day))
            lam, total = leading_eigenvalue(psi)
            trace_err.append(abs(total - n))
            out[k] = lam / n
        return out

    values = _sweep(chunk, ts, threads)
    if flat_days:
        log.warning("%d window(s) had zero-variance sectors; their correlations were set to 0", len(flat_days))
    diagnostics = {
        "zero_variance_windows": len(flat_days),
        "max_trace_error": max(trace_err, default=0.0),
    }
    return _series("C", returns, ts, values, diagnostics=diagnostics)


def kendall_tau(x, y) -> float:
    """Tau-a: (concordant - discordant) / C(n, 2); NaN if either vector is constant."""
    tau, _ = _kendall_rows(np.asarray(x, float)[None, :], np.asarray(y, float)[None, :])
    return float(tau[0])


def _kendall_rows(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[1]
    i, j = np.triu_indices(n, k=1)
    net = np.einsum(
        "kp,kp->k",
        np.sign(A[:, i] - A[:, j]).astype(np.int64),
        np.sign(B[:, i] - B[:, j]).astype(np.int64),
    )
    pairs = n * (n - 1) // 2
    tau = net / pairs
    sd = math.sqrt(2 * (2 * n + 5) / (9 * n * (n - 1)))
    p = erfc(np.abs(tau) / sd / math.sqrt(2))
    undefined = (np.ptp(A, axis=1) == 0) | (np.ptp(B, axis=1) == 0)
    tau[undefined] = np.nan
    p[undefined] = np.nan
    return tau, p


def kendall_pvalue(tau: float, n: int) -> float:
    """Two-sided p-value of tau against zero under the normal approximation."""
    sd = math.sqrt(2 * (2 * n + 5) / (9 * n * (n - 1)))
    return float(erfc(abs(tau) / sd / math.sqrt(2)))


def _pearson_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Ac = A - A.mean(axis=1, keepdims=True)
    Bc = B - B.mean(axis=1, keepdims=True)
    num = np.einsum("kp,kp->k", Ac, Bc)
    den = np.sqrt(np.einsum("kp,kp->k", Ac, Ac) * np.einsum("kp,kp->k", Bc, Bc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return np.clip(r, -1.0, 1.0)


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks; NaN if either vector is constant."""
    A = rankdata(np.asarray(x, float))[None, :]
    B = rankdata(np.asarray(y, float))[None, :]
    return float(_pearson_rows(A, B)[0])


def rank_series(
    returns: SectorReturnsPanel,
    cfg: WindowConfig = WindowConfig(),
    kind: str = "kendall",
    threads: int = 1,
) -> ShiftSeries:
    """Correlation between adjacent monthly sector-sum vectors.

    ``kind`` is ``kendall``, ``spearman`` or ``pearson``. The Kendall series
    also carries two-sided p-values. Undefined coefficients (a constant
    vector) are NaN.
    """
    if kind not in _RANK_KINDS:
        raise InputError(f"unknown rank-correlation kind {kind!r}")
    if returns.n < 2:
        raise InputError("rank correlations need at least two sectors")
    ts = cfg.t_index(returns.T)
    R, tau = returns.returns, cfg.tau

    def chunk(t):
        A = _window_sums(R, tau, t)
        B = _window_sums(R, tau, t + tau)
        if kind == "kendall":
            return np.column_stack(_kendall_rows(A, B))
        if kind == "spearman":
            A, B = rankdata(A, axis=1), rankdata(B, axis=1)
        return _pearson_rows(A, B)[:, None]

    out = _sweep(chunk, ts, threads)
    missing = int(np.isnan(out[:, 0]).sum())
    if missing:
        log.warning("%s undefined on %d day(s) (constant sector sums)", _RANK_KINDS[kind], missing)
    pvalues = out[:, 1] if kind == "kendall" else None
    return _series(
        _RANK_KINDS[kind], returns, ts, out[:, 0].copy(),
        pvalues=pvalues, diagnostics={"undefined": missing},
    )


def annotate_threshold(series: ShiftSeries, percentile: float = 0.05) -> ShiftSeries:
    """Flag days whose value lies strictly above the top-``percentile`` cut.

    The cut is the linearly interpolated ``1 - percentile`` quantile of the
    defined (non-NaN) values.
    """
    if not 0 < percentile < 1:
        raise InputError("percentile must lie strictly between 0 and 1")
    vals = np.asarray(series.values, dtype=float)
    ok = ~np.isnan(vals)
    if not ok.any():
        return replace(series, threshold=float("nan"), breaches=np.empty(0, dtype=int))
    cut = float(np.quantile(vals[ok], 1 - percentile, method="linear"))
    hits = series.t_index[ok & (np.where(ok, vals, -np.inf) > cut)]
    return replace(series, threshold=cut, breaches=hits)


def compute(returns: SectorReturnsPanel, measure: str, cfg: WindowConfig = WindowConfig(), threads: int = 1) -> ShiftSeries:
    """Dispatch on the command-line measure name."""
    if measure == "s":
        return s_series(returns, cfg, threads)
    if measure == "w":
        return w_series(returns, cfg, threads)
    if measure == "c":
        return c_series(returns, cfg, threads)
    if measure in _RANK_KINDS:
        return rank_series(returns, cfg, measure, threads)
    raise InputError(f"unknown measure {measure!r}; choose from {', '.join(MEASURES)}")
