import json
import math
import warnings

import numpy as np
import pytest

from deltavar.errors import DomainError, PreconditionError
from deltavar.sampling import SamplingPlan, stratified_mean
from deltavar.series import eval_main_term, main_term_poly, stieltjes
from deltavar.sieve import dk_single
from deltavar.variance import (
    CSV_COLUMNS,
    DegenerateIntervalWarning,
    covariance_report,
    delta_increments,
    delta_k,
    residual_prop,
    variance_ivic,
    variance_longH,
    variance_short,
)

SEED = 1


def test_delta_k_examples():
    assert delta_k(2, [1.0])[0] == pytest.approx(1 - (2 * stieltjes(0) - 1), abs=1e-12)
    assert delta_k(2, [1.0])[0] == pytest.approx(0.84557, abs=1e-5)
    xs = np.array([1.0, 2.5, 17.9, 1000.0])
    np.testing.assert_allclose(delta_k(1, xs), np.floor(xs) - xs, atol=1e-9)
    oracle = sum(dk_single(3, n) for n in range(1, 1001)) - eval_main_term(main_term_poly(3), 1000.0)
    assert delta_k(3, [1000.0])[0] == pytest.approx(oracle, abs=1e-9)


def test_delta_increments_exact_counts():
    xs = np.array([10.5, 3.0, 100.0])
    hs = np.array([2.0, 0.5, 10.0])
    # (x, x+h] holds floor(x) < n <= floor(x+h)
    counts = [sum(dk_single(2, n) for n in range(math.floor(x) + 1, math.floor(x + h) + 1)) for x, h in zip(xs, hs)]
    main = eval_main_term(main_term_poly(2), xs + hs) - eval_main_term(main_term_poly(2), xs)
    np.testing.assert_allclose(delta_increments(2, xs, hs), np.array(counts) - main, atol=1e-9)


def test_plan_points_sorted_in_range():
    p = SamplingPlan(1e5, 1000, seed=3)
    x = p.points()
    assert np.all(np.diff(x) > 0) and x[0] >= 1e5 and x[-1] <= 2e5
    np.testing.assert_array_equal(x, SamplingPlan(1e5, 1000, seed=3).points())
    g = SamplingPlan(10.0, 5, mode="grid").points()
    np.testing.assert_allclose(g, [11, 13, 15, 17, 19])


def test_stratified_mean():
    m, se = stratified_mean([1.0, 3.0, 5.0, 7.0])
    assert m == 4.0
    assert se == pytest.approx(math.sqrt(8.0) / 4)
    m, se = stratified_mean([2.0])
    assert m == 2.0 and math.isnan(se)


def test_short_single_sample():
    plan = SamplingPlan(1e5, 1, seed=SEED)
    r = variance_short(2, 1e5, 10.0, 0.3, plan)
    x = plan.points()
    inc = delta_increments(2, x, x**0.5 / 10.0)
    assert r.empirical_variance == pytest.approx(float(inc[0]) ** 2, rel=1e-12)
    assert r.samples == 1


def test_short_degenerate_warning():
    with pytest.warns(DegenerateIntervalWarning):
        variance_short(2, 100.0, 50.0, 0.3, SamplingPlan(100.0, 10))


def test_short_guards():
    plan = SamplingPlan(1e4, 10)
    with pytest.raises(DomainError):
        variance_short(2, 1e4, 1.0, 0.3, plan)
    with pytest.raises(DomainError):
        variance_short(0, 1e4, 5.0, 0.3, plan)
    with pytest.raises(PreconditionError):
        variance_short(2, 1e4, 5.0, 0.3, SamplingPlan(1e4, 10, interval_mode="fixed"))


def test_longH_single_sample_and_errors():
    plan = SamplingPlan(1e5, 1, seed=SEED, interval_mode="fixed")
    r = variance_longH(2, 1e5, 5000.0, plan)
    inc = delta_increments(2, plan.points(), [5000.0])
    assert r.empirical_variance == pytest.approx(float(inc[0]) ** 2, rel=1e-12)
    with pytest.raises(PreconditionError):
        variance_longH(2, 1e5, 2e5, plan)
    with pytest.raises(PreconditionError):
        variance_longH(2, 1e5, 0.0, plan)


def test_ivic_degenerate_warning():
    with pytest.warns(DegenerateIntervalWarning):
        variance_ivic(1e4, 500.0, SamplingPlan(1e4, 20, interval_mode="fixed"))


def test_residual_guards():
    plan = SamplingPlan(1e5, 10)
    with pytest.raises(DomainError):
        residual_prop(1, 0.3, 1e5, plan)
    with pytest.raises(PreconditionError):
        residual_prop(3, 0.8, 1e5, plan)
    with pytest.raises(PreconditionError):
        residual_prop(4, 0.2, 1e5, plan, mode="unconditional")
    r = residual_prop(4, 0.2, 1e5, plan)
    assert r.exploration and r.extras["mode"] == "lindelof"


def test_report_serialisation():
    r = variance_short(2, 1e5, 10.0, 0.3, SamplingPlan(1e5, 50, seed=SEED))
    row = r.csv_row()
    assert list(row) == CSV_COLUMNS
    assert row["ratio_proxy"] == pytest.approx(r.empirical_variance / r.prediction_proxy)
    j = json.loads(json.dumps(r.as_json(), allow_nan=False))
    assert j["k"] == 2 and j["regime"] == "short"
    single = variance_short(2, 1e5, 10.0, 0.3, SamplingPlan(1e5, 1))
    assert single.as_json()["standard_error"] is None


def _fields(r):
    return (r.empirical_mean, r.empirical_variance, r.standard_error, r.prediction, r.prediction_proxy)


def test_determinism_across_workers():
    plan = SamplingPlan(1e6, 300, seed=7)
    a = variance_short(3, 1e6, 4.0, 0.3, plan, segment_size=1 << 14, workers=1)
    b = variance_short(3, 1e6, 4.0, 0.3, plan, segment_size=1 << 14, workers=4)
    assert _fields(a) == _fields(b)
    fp = SamplingPlan(1e6, 300, seed=7, interval_mode="fixed")
    a = variance_longH(2, 1e6, 1e4, fp, segment_size=1 << 14, workers=1)
    b = variance_longH(2, 1e6, 1e4, fp, segment_size=1 << 14, workers=3)
    assert _fields(a) == _fields(b)


def test_covariance_report():
    r = covariance_report(2, 1e6, 1e4, 0.2, SamplingPlan(1e6, 200, seed=SEED, interval_mode="fixed"))
    assert r.prediction_kind == "none"
    assert r.extras["relative_covariance"] == pytest.approx(r.empirical_mean / r.empirical_variance)


# -- full-scale runs -------------------------------------------------------------

@pytest.mark.slow
def test_short_k2_full_run():
    X, L = 1e8, 50.0
    r = variance_short(2, X, L, 1.0, SamplingPlan(X, 10**4, seed=SEED))
    assert abs(r.ratio_proxy - 1) <= 0.15
    assert 0.4 <= r.ratio <= 1.6


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="at the largest admissible theta=1/2 the proxy keeps only 10^4 terms and sits ~4.7x below the increments",
)
def test_short_k3_full_run():
    X = 1e8
    r = variance_short(3, X, 3.0, 0.5, SamplingPlan(X, 10**4, seed=SEED))
    assert abs(r.ratio_proxy - 1) <= 0.20


@pytest.mark.slow
def test_longH_k2_full_run_band():
    X = 1e8
    r = variance_longH(2, X, X**0.7, SamplingPlan(X, 10**4, seed=SEED, interval_mode="fixed"))
    assert 0.7 <= r.ratio <= 1.3


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="second-order log terms keep the ratio near 1.6 at X=1e8 and 1e9")
def test_ivic_full_run():
    rs = [variance_ivic(X, 50.0, SamplingPlan(X, 10**4, seed=SEED, interval_mode="fixed")) for X in (1e8, 1e9)]
    assert 0.5 <= rs[0].ratio <= 1.5
    assert abs(rs[1].ratio - 1) < abs(rs[0].ratio - 1)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the residual is ~22% of the mean square of Delta_2 at X=1e7, theta=1/2")
def test_residual_k2_small():
    X = 1e7
    r = residual_prop(2, 0.5, X, SamplingPlan(X, 10**4, seed=SEED))
    assert r.empirical_variance < 0.1 * r.extras["delta_mean_square"]


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the Dirichlet series behind B_3 converges too slowly; the ratio is ~0.43 at X=1e8")
def test_longH_k3_full_run_band():
    X = 1e8
    r = variance_longH(3, X, X**0.8, SamplingPlan(X, 10**4, seed=SEED, interval_mode="fixed"))
    assert 0.6 <= r.ratio <= 1.4
