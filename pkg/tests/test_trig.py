import cmath
import math

import numpy as np
import pytest
from scipy import integrate

from deltavar.constants import interval_factor
from deltavar.errors import CapacityError, DomainError, PreconditionError
from deltavar.sampling import SamplingPlan
from deltavar.sieve import build_table
from deltavar.trig import (
    build_spec,
    covariance_estimate,
    empirical_covariance,
    eval_increment,
    eval_P,
    floor_power,
    mvt_diagonal,
    mvt_quadrature,
)


def test_floor_power():
    assert floor_power(1e6, 0.3) == 63
    assert floor_power(1e6, 0.5) == 1000
    assert floor_power(1e8, 0.25) == 100


def test_build_spec_examples():
    s = build_spec(3, 0.01, 10.0)
    assert s.N == 1 and s.amps[0] == 1.0 and s.freqs[0] == 1.0
    assert build_spec(2, 0.1, 1e4).phase == pytest.approx(-math.pi / 4)
    assert build_spec(3, 0.3, 1e6).N == 63


def test_build_spec_errors():
    with pytest.raises(CapacityError):
        build_spec(2, 0.5, 1e8, term_budget=100)
    with pytest.raises(DomainError):
        build_spec(1, 0.5, 1e4)
    with pytest.warns(RuntimeWarning):
        build_spec(3, 0.6, 1e4)


def test_eval_P_single_term_k3():
    s = build_spec(3, 0.01, 1e6)
    assert eval_P(s, 1e6) == pytest.approx(100 / (math.pi * math.sqrt(3)), rel=1e-12)
    assert eval_P(s, 1e6) == pytest.approx(18.3776, abs=1e-4)


def test_eval_P_single_term_k2_extremal():
    s = build_spec(2, 0.01, 1e6)
    x = 1000.0625**2  # 4 pi sqrt(x) = pi/4 mod 2 pi cancels the -pi/4 phase
    assert eval_P(s, x) == pytest.approx(x**0.25 / (math.pi * math.sqrt(2)), rel=1e-10)


def test_eval_P_matches_direct_sum():
    s = build_spec(2, 0.4, 1e5)
    xs = np.array([1e5, 1.3e5, 1.99e5])
    n = np.arange(1, s.N + 1, dtype=float)
    d = build_table(2, s.N).values.astype(float)
    direct = [
        x**0.25 / (math.pi * math.sqrt(2))
        * math.fsum(d * n**-0.75 * np.cos(4 * np.pi * np.sqrt(n * x) - np.pi / 4))
        for x in xs
    ]
    np.testing.assert_allclose(eval_P(s, xs), direct, rtol=1e-9, atol=1e-9)


def test_increment_shrinks_with_L():
    s = build_spec(2, 0.3, 1e6)
    x = 1.2345e6
    incs = [abs(eval_increment(s, x, L)) for L in (1e3, 1e5, 1e7)]
    assert incs[2] < incs[1] < incs[0]
    with pytest.raises(DomainError):
        eval_increment(s, x, 1.5)


def test_mvt_diagonal():
    assert mvt_diagonal([1.0], 0.0, 1e4) == pytest.approx(1e4)
    k, X = 3, 1e4
    a = 1 - 1 / k
    assert mvt_diagonal([1.0], a, X) == pytest.approx(interval_factor(k) * X ** (2 - 1 / k), rel=1e-14)
    with pytest.raises(DomainError):
        mvt_diagonal([1.0], 1.5, X)


@pytest.mark.parametrize("k, alpha", [(2, 0.0), (2, 0.5), (3, 2 / 3)])
def test_mvt_quadrature_single_term(k, alpha):
    X = 1e4
    assert mvt_quadrature([1.0], alpha, X, k) == pytest.approx(mvt_diagonal([1.0], alpha, X), rel=1e-6)


def test_mvt_quadrature_zero_and_refusal():
    assert mvt_quadrature([0.0, 0.0], 0.5, 1e4, 2) == 0.0
    with pytest.raises(PreconditionError):
        mvt_quadrature(np.ones(8), 0.5, 1e8, 2, node_budget=64)


def test_mvt_quadrature_two_terms_closed_form():
    X = 100.0
    w = 4 * math.pi * (math.sqrt(2) - 1)

    def F(t):
        return 2 * cmath.exp(1j * w * t) * (t / (1j * w) + 1 / w**2)

    off = F(math.sqrt(2 * X)) - F(math.sqrt(X))
    exact = 2 * X + 2 * off.real
    assert mvt_quadrature([1.0, 1.0], 0.0, X, 2) == pytest.approx(exact, rel=1e-9)


def test_covariance_H0_is_mean_square():
    s = build_spec(2, 0.3, 1e6)
    plan = SamplingPlan(1e6, 500, seed=4, interval_mode="fixed")
    est = covariance_estimate(s, 1e6, 0.0, plan)
    assert est.covariance == est.mean_square


def test_covariance_single_term_oracle():
    X, H = 1e6, 1e4
    s = build_spec(2, 0.01, X)
    plan = SamplingPlan(X, 20000, mode="grid", interval_mode="fixed")
    f = lambda x: eval_P(s, x + H) * eval_P(s, x)
    edges = np.linspace(X, 2 * X, 401)
    oracle = math.fsum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(edges, edges[1:])) / X
    assert empirical_covariance(s, X, H, plan) == pytest.approx(oracle, rel=1e-3, abs=1e-3 * X**0.5)


def test_covariance_plan_mismatch():
    s = build_spec(2, 0.1, 1e6)
    with pytest.raises(PreconditionError):
        empirical_covariance(s, 1e6, 10.0, SamplingPlan(2e6, 10))


def test_parseval_mean_square():
    k, X, theta = 2, 1e6, 0.3
    s = build_spec(k, theta, X)
    plan = SamplingPlan(X, 20000, mode="grid")
    ms = float(np.mean(eval_P(s, plan.points()) ** 2))
    pred = X ** (1 - 1 / k) * interval_factor(k) / (2 * math.pi**2 * k) * math.fsum(s.amps**2)
    assert ms == pytest.approx(pred, rel=0.05)
