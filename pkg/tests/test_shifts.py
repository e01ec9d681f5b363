import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sectorshift import shifts
from sectorshift.errors import InputError
from sectorshift.shifts import (
    ShiftSeries,
    WindowConfig,
    annotate_threshold,
    c_series,
    kendall_pvalue,
    kendall_tau,
    leading_eigenvalue,
    monthly_sums,
    rank_series,
    rolling_correlation,
    s_series,
    spearman_rho,
    w_series,
    wasserstein_1d,
)

import oracles
from conftest import returns_panel

finite = st.floats(-1.0, 1.0, allow_nan=False)


# ---- monthly sums -------------------------------------------------------

def test_monthly_sums_zero():
    r = returns_panel(np.zeros((10, 3)))
    assert np.all(monthly_sums(r, WindowConfig(4), 7) == 0)


def test_monthly_sums_two_terms():
    r = returns_panel([[0.01], [0.02], [0.5]])
    assert monthly_sums(r, WindowConfig(2), 2)[0] == pytest.approx(0.03, abs=1e-17)


def test_monthly_sums_match_naive_resummation():
    R = np.random.default_rng(3).normal(0, 0.02, size=(90, 7))
    r = returns_panel(R)
    for t in (30, 31, 57, 90):
        np.testing.assert_array_equal(monthly_sums(r, WindowConfig(30), t), oracles.naive_window_sum(R, 30, t))


def test_monthly_sums_range_checked():
    r = returns_panel(np.zeros((10, 2)))
    with pytest.raises(InputError):
        monthly_sums(r, WindowConfig(4), 3)
    with pytest.raises(InputError):
        monthly_sums(r, WindowConfig(4), 11)


# ---- window config and lengths ------------------------------------------

@pytest.mark.parametrize("T, tau", [(100, 30), (60, 30), (9, 1), (4780, 30)])
def test_series_length(T, tau):
    r = returns_panel(np.random.default_rng(T).normal(size=(T, 3)))
    s = s_series(r, WindowConfig(tau))
    assert len(s) == T - 2 * tau + 1
    assert s.t_index[0] == tau and s.t_index[-1] == T - tau
    assert s.dates[0] == r.dates[tau - 1]


@pytest.mark.parametrize("tau", [0, 51])
def test_window_bounds(tau):
    with pytest.raises(InputError):
        WindowConfig(tau).check(100)


# ---- S ------------------------------------------------------------------

def test_s_zero_for_periodic_returns():
    tau = 5
    block = np.random.default_rng(0).normal(size=(tau, 4))
    r = returns_panel(np.tile(block, (6, 1)))
    s = s_series(r, WindowConfig(tau))
    aligned = s.t_index % tau == 0
    assert np.all(s.values[aligned] == 0)
    np.testing.assert_allclose(s.values, 0, atol=1e-14)


def test_s_single_term():
    s = s_series(returns_panel([[0.1], [-0.1]]), WindowConfig(1))
    assert s.values.tolist() == [pytest.approx(0.2, abs=1e-17)]


def test_s_matches_double_loop():
    R = np.random.default_rng(5).normal(0, 0.01, size=(40, 6))
    s = s_series(returns_panel(R), WindowConfig(7))
    np.testing.assert_array_equal(s.values, oracles.brute_s(R, 7))


# ---- Wasserstein --------------------------------------------------------

def test_wasserstein_identity():
    x = [0.3, -1.0, 2.0, 0.3]
    assert wasserstein_1d(x, list(reversed(x))) == 0


def test_wasserstein_translation():
    assert wasserstein_1d([0, 1], [1, 2]) == 1


def test_wasserstein_matches_permutation_search():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a, b = rng.normal(size=8), rng.normal(size=8)
        assert wasserstein_1d(a, b) == pytest.approx(oracles.transport_by_permutation(a, b), abs=1e-12)


def test_wasserstein_unequal_sizes_matches_cdf_integral():
    rng = np.random.default_rng(9)
    for n, m in [(3, 5), (7, 2), (30, 45), (1, 9)]:
        a, b = rng.normal(size=n), rng.normal(1, 2, size=m)
        assert wasserstein_1d(a, b) == pytest.approx(stats.wasserstein_distance(a, b), rel=1e-12, abs=1e-14)


def test_wasserstein_rejects_empty():
    with pytest.raises(InputError):
        wasserstein_1d([], [1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=12), st.lists(finite, min_size=1, max_size=12),
       st.lists(finite, min_size=1, max_size=12))
def test_wasserstein_is_a_metric(a, b, c):
    ab, ba = wasserstein_1d(a, b), wasserstein_1d(b, a)
    assert ab >= 0
    assert ab == pytest.approx(ba, abs=1e-12)
    assert ab <= wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=2, max_size=10), st.floats(-5, 5))
def test_wasserstein_shift(a, c):
    assert wasserstein_1d(a, [x + c for x in a]) == pytest.approx(abs(c), abs=1e-12)


# ---- W ------------------------------------------------------------------

A = 0.01


@pytest.mark.parametrize("window, s_contrib, w_contrib", [
    ([A, -A, -A, A], 0.0, 0.0),
    ([A, A, -A, -A], 4 * A, 2 * A),
    ([-A, A, 0.0, 0.0], 0.0, A),
])
def test_w_versus_s_on_two_day_windows(window, s_contrib, w_contrib):
    r = returns_panel(np.array(window)[:, None])
    cfg = WindowConfig(2)
    assert s_series(r, cfg).values.tolist() == [pytest.approx(s_contrib, abs=1e-17)]
    assert w_series(r, cfg).values.tolist() == [pytest.approx(w_contrib, abs=1e-17)]


def test_w_zero_for_identical_windows():
    block = np.random.default_rng(1).normal(size=(6, 3))
    r = returns_panel(np.tile(block, (4, 1)))
    w = w_series(r, WindowConfig(6))
    assert np.all(w.values[w.t_index % 6 == 0] == 0)


def test_w_matches_naive_sorted_differences():
    R = np.random.default_rng(6).normal(0, 0.01, size=(45, 5))
    w = w_series(returns_panel(R), WindowConfig(9))
    np.testing.assert_array_equal(w.values, oracles.brute_w(R, 9))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_transport_dominates_sum_difference(seed, tau):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_t(3, size=tau), rng.standard_t(3, size=tau)
    assert tau * wasserstein_1d(x, y) >= abs(x.sum() - y.sum()) - 1e-12


# ---- rolling correlation and C ------------------------------------------

def test_rolling_correlation_extremes():
    rng = np.random.default_rng(2)
    x = rng.normal(size=20)
    r = returns_panel(np.column_stack([x, x, -x]))
    psi = rolling_correlation(r, WindowConfig(5), 10)
    assert psi[0, 1] == pytest.approx(1.0, abs=1e-15)
    assert psi[0, 2] == pytest.approx(-1.0, abs=1e-15)


def test_rolling_correlation_matches_textbook():
    R = np.random.default_rng(4).normal(size=(50, 3))
    r = returns_panel(R)
    cfg, t = WindowConfig(10), 25
    psi = rolling_correlation(r, cfg, t)
    win = R[t - 10:t + 10]
    for j in range(3):
        for k in range(3):
            expected = 1.0 if j == k else oracles.textbook_pearson(list(win[:, j]), list(win[:, k]))
            assert psi[j, k] == pytest.approx(expected, abs=1e-12)


def test_rolling_correlation_zero_variance(caplog):
    R = np.random.default_rng(4).normal(size=(30, 3))
    R[:, 1] = 0.002
    with caplog.at_level(logging.WARNING):
        psi = rolling_correlation(returns_panel(R), WindowConfig(5), 10)
    assert psi[1, 1] == 1 and psi[0, 1] == 0 and psi[1, 2] == 0
    assert "zero-variance" in caplog.text


def test_rolling_correlation_range_checked():
    with pytest.raises(InputError):
        rolling_correlation(returns_panel(np.zeros((20, 2))), WindowConfig(5), 16)


@pytest.mark.parametrize("n", [2, 5, 60])
def test_leading_eigenvalue_identity_and_ones(n):
    lam, total = leading_eigenvalue(np.eye(n))
    assert lam / n == pytest.approx(1 / n, abs=1e-15)
    lam, total = leading_eigenvalue(np.ones((n, n)))
    assert lam / n == pytest.approx(1.0, abs=1e-13)
    assert total == pytest.approx(n, abs=1e-12)


@pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.4, 0.99])
def test_two_by_two_closed_form(rho):
    lam, _ = leading_eigenvalue(np.array([[1.0, rho], [rho, 1.0]]))
    assert lam / 2 == pytest.approx((1 + abs(rho)) / 2, abs=1e-12)


def test_c_series_spectral_properties(small_returns):
    cfg = WindowConfig(20)
    c = c_series(small_returns, cfg)
    n = small_returns.n
    assert np.all(c.values >= 1 / n - 1e-12) and np.all(c.values <= 1 + 1e-12)
    assert c.diagnostics["max_trace_error"] < 1e-9
    for t in c.t_index[::37]:
        psi = rolling_correlation(small_returns, cfg, t)
        assert np.array_equal(psi, psi.T)
        assert oracles.power_iteration(psi) == pytest.approx(c.values[t - cfg.tau] * n, abs=1e-8)


def test_c_series_records_zero_variance_windows():
    R = np.random.default_rng(0).normal(size=(40, 3))
    R[10:25, 2] = 0.0
    c = c_series(returns_panel(R), WindowConfig(5))
    assert c.diagnostics["zero_variance_windows"] > 0
    assert np.all(np.isfinite(c.values))


# ---- rank correlations --------------------------------------------------

def test_kendall_basic_cases():
    x = [0.3, -0.1, 0.7, 0.2]
    assert kendall_tau(x, x) == 1
    assert kendall_tau(x, [-v for v in x]) == -1
    assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-16)
    assert spearman_rho(x, x) == pytest.approx(1.0, abs=1e-15)


def test_kendall_constant_vector_is_missing():
    assert math.isnan(kendall_tau([1, 1, 1], [1, 2, 3]))
    assert math.isnan(spearman_rho([1, 2, 3], [4, 4, 4]))


def test_kendall_matches_scipy_without_ties():
    rng = np.random.default_rng(12)
    for _ in range(20):
        x, y = rng.normal(size=60), rng.normal(size=60)
        ref = stats.kendalltau(x, y, method="asymptotic")
        tau = kendall_tau(x, y)
        assert tau == pytest.approx(ref.statistic, abs=1e-14)
        assert kendall_pvalue(tau, 60) == pytest.approx(ref.pvalue, rel=1e-9)


def test_spearman_matches_scipy_with_ties():
    x = [1.0, 2.0, 2.0, 5.0, 3.0, 3.0, 0.5]
    y = [0.1, 0.4, 0.2, 0.9, 0.9, 0.3, 0.0]
    assert spearman_rho(x, y) == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-14)


def test_pvalue_is_one_at_zero_tau():
    assert kendall_pvalue(0.0, 60) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rank_coefficients_ignore_monotone_transforms(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=15), rng.normal(size=15)
    gx, gy = np.exp(3 * x), y ** 3 + y
    assert kendall_tau(gx, gy) == kendall_tau(x, y)
    assert spearman_rho(gx, gy) == pytest.approx(spearman_rho(x, y), abs=1e-12)


def test_pearson_is_not_rank_invariant():
    x = np.linspace(0.0, 2.0, 15)
    assert shifts._pearson_rows(x[None], np.exp(4 * x)[None])[0] < 0.99
    assert spearman_rho(x, np.exp(4 * x)) == pytest.approx(1.0)


@pytest.mark.parametrize("kind, name", [("kendall", "KendallTau"), ("spearman", "Spearman"), ("pearson", "Pearson")])
def test_rank_series_matches_pointwise(small_returns, kind, name):
    cfg = WindowConfig(15)
    series = rank_series(small_returns, cfg, kind)
    assert series.name == name
    assert (series.pvalues is not None) == (kind == "kendall")
    R = small_returns.returns
    for k, t in enumerate(series.t_index[::23]):
        a = oracles.naive_window_sum(R, 15, t)
        b = oracles.naive_window_sum(R, 15, t + 15)
        if kind == "kendall":
            ref = oracles.kendall_pairs(a, b)
        elif kind == "spearman":
            ref = stats.spearmanr(a, b).statistic
        else:
            ref = oracles.textbook_pearson(list(a), list(b))
        assert series.values[t - 15] == pytest.approx(ref, abs=1e-12)


def test_kendall_series_pvalue_series(small_returns):
    k = rank_series(small_returns, WindowConfig(10), "kendall")
    p = k.pvalue_series()
    assert p.name == "KendallPValue"
    assert np.all((p.values >= 0) & (p.values <= 1))
    with pytest.raises(ValueError):
        rank_series(small_returns, WindowConfig(10), "pearson").pvalue_series()


def test_rank_series_flags_constant_sums():
    R = np.zeros((20, 4))
    k = rank_series(returns_panel(R), WindowConfig(3), "kendall")
    assert np.all(np.isnan(k.values))
    assert k.diagnostics["undefined"] == len(k)


def test_affine_transform_scales_s_and_w_and_keeps_k(small_returns):
    cfg = WindowConfig(12)
    moved = returns_panel(2.5 * small_returns.returns + 0.003)
    np.testing.assert_allclose(s_series(moved, cfg).values, 2.5 * s_series(small_returns, cfg).values, rtol=1e-9)
    np.testing.assert_allclose(w_series(moved, cfg).values, 2.5 * w_series(small_returns, cfg).values, rtol=1e-9)
    np.testing.assert_array_equal(
        rank_series(moved, cfg, "kendall").values, rank_series(small_returns, cfg, "kendall").values
    )


# ---- thresholds ---------------------------------------------------------

def _series(values):
    values = np.asarray(values, dtype=float)
    return ShiftSeries("S", np.arange(len(values)) + 1, values)


def test_threshold_constant_series():
    s = annotate_threshold(_series(np.full(50, 3.0)), 0.05)
    assert s.threshold == 3.0
    assert len(s.breaches) == 0


def test_threshold_one_to_hundred():
    x = np.arange(1, 101, dtype=float)
    s = annotate_threshold(_series(x), 0.05)
    # linear interpolation at position (100 - 1) * 0.95 = 94.05 of the sorted values
    cut = x[94] + 0.05 * (x[95] - x[94])
    assert s.threshold == pytest.approx(cut, abs=1e-12)
    assert s.breaches.tolist() == [96, 97, 98, 99, 100]


def test_threshold_flags_spike():
    x = np.random.default_rng(0).uniform(0, 1, 200)
    x[123] = 50.0
    s = annotate_threshold(_series(x), 0.004)
    assert s.breaches.tolist() == [124]


def test_threshold_ignores_missing():
    s = annotate_threshold(_series([np.nan, 1.0, 2.0, 3.0, np.nan]), 0.5)
    assert s.threshold == 2.0
    assert s.breaches.tolist() == [4]


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2])
def test_threshold_percentile_bounds(p):
    with pytest.raises(InputError):
        annotate_threshold(_series([1.0, 2.0]), p)


# ---- parallel sweeps ----------------------------------------------------

@pytest.mark.parametrize("measure", shifts.MEASURES)
def test_thread_count_does_not_change_results(small_returns, measure):
    cfg = WindowConfig(10)
    one = shifts.compute(small_returns, measure, cfg, threads=1)
    many = shifts.compute(small_returns, measure, cfg, threads=7)
    assert one.values.tobytes() == many.values.tobytes()
    if one.pvalues is not None:
        assert one.pvalues.tobytes() == many.pvalues.tobytes()


def test_unknown_measure(small_returns):
    with pytest.raises(InputError):
        shifts.compute(small_returns, "x")
