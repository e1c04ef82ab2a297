"""Delta_k at sample points and the short-interval variance experiments.

Every experiment merges all abscissae it needs into one ascending checkpoint
list so that the divisor sieve streams over [1, 2X + max h] exactly once.
An interval (x, x + h] counts the integers floor(x) < n <= floor(x + h).
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .constants import constants_bundle, c_constant, default_a_k, ivic_leading, m_script
from .errors import DomainError, PreconditionError
from .sampling import SamplingPlan, stratified_mean
from .series import eval_main_term, main_term_poly
from .sieve import DEFAULT_SEGMENT, stream_prefix
from .trig import build_spec, covariance_estimate, eval_increment, eval_P, floor_power, increment_length

CSV_COLUMNS = [
    "k", "X", "L_or_H", "theta", "M", "seed",
    "empirical_variance", "stderr", "prediction_leading", "prediction_proxy",
    "ratio_leading", "ratio_proxy", "seconds",
    "regime", "version", "config_hash",
]


# max terms x samples for evaluating P-increments alongside the proxy
P_EVAL_BUDGET = 2 * 10**9


class DegenerateIntervalWarning(RuntimeWarning):
    pass


@dataclass
class VarianceReport:
    k: int
    X: float
    regime: str
    samples: int
    seed: int
    empirical_mean: float
    empirical_variance: float
    standard_error: float
    prediction: Optional[float]
    L: Optional[float] = None
    H: Optional[float] = None
    theta: Optional[float] = None
    prediction_kind: str = "asymptotic"
    prediction_proxy: Optional[float] = None
    exploration: bool = False
    seconds: float = 0.0
    plan: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    config_hash: str = ""
    version: str = __version__

    @property
    def ratio(self) -> Optional[float]:
        return _ratio(self.empirical_variance, self.prediction)

    @property
    def ratio_proxy(self) -> Optional[float]:
        return _ratio(self.empirical_variance, self.prediction_proxy)

    def as_json(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["ratio_proxy"] = self.ratio_proxy
        return _clean(d)

    def csv_row(self) -> dict:
        return {
            "k": self.k,
            "X": self.X,
            "L_or_H": self.L if self.L is not None else self.H,
            "theta": self.theta,
            "M": self.samples,
            "seed": self.seed,
            "empirical_variance": self.empirical_variance,
            "stderr": self.standard_error,
            "prediction_leading": self.prediction,
            "prediction_proxy": self.prediction_proxy,
            "ratio_leading": self.ratio,
            "ratio_proxy": self.ratio_proxy,
            "seconds": round(self.seconds, 3),
            "regime": self.regime,
            "version": self.version,
            "config_hash": self.config_hash,
        }


def _ratio(num, den):
    if den is None or den == 0 or not math.isfinite(den):
        return None
    return num / den


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- Delta_k -------------------------------------------------------------------

def _prefixes(k, xs, segment_size, workers) -> np.ndarray:
    """Exact prefix sums at arbitrary (unsorted) xs >= 1, as an object array of ints."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs, kind="stable")
    srt = xs[order]
    hi = math.floor(srt[-1]) + 1
    pts = stream_prefix(k, 1, hi, srt, segment_size=segment_size, workers=workers)
    out = np.empty(xs.size, dtype=object)
    out[order] = [p.prefix for p in pts]
    return out


def delta_k(k: int, xs, segment_size: int = DEFAULT_SEGMENT, workers: int = 1) -> np.ndarray:
    """Delta_k(x) at ascending xs >= 1 from a single streaming pass."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return np.zeros(0)
    if np.any(np.diff(xs) < 0):
        raise PreconditionError("xs must be sorted ascending")
    if xs[0] < 1:
        raise DomainError("Delta_k is evaluated for x >= 1")
    pts = stream_prefix(k, 1, math.floor(xs[-1]) + 1, xs, segment_size=segment_size, workers=workers)
    prefix = np.array([float(p.prefix) for p in pts])
    return prefix - eval_main_term(main_term_poly(k), xs)


def delta_increments(k: int, xs, hs, segment_size: int = DEFAULT_SEGMENT, workers: int = 1) -> np.ndarray:
    """Delta_k(x + h) - Delta_k(x) with the integer count taken exactly."""
    xs = np.asarray(xs, dtype=float)
    ys = xs + np.asarray(hs, dtype=float)
    pre = _prefixes(k, np.concatenate([xs, ys]), segment_size, workers)
    counts = np.array([float(b - a) for a, b in zip(pre[: xs.size], pre[xs.size :])])
    poly = main_term_poly(k)
    return counts - (eval_main_term(poly, ys) - eval_main_term(poly, xs))


# -- experiments ---------------------------------------------------------------

def _summarize(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    mean, _ = stratified_mean(v)
    ms, se = stratified_mean(v * v)
    return mean, ms, se


def _check_k(k: int):
    if not 2 <= k <= 8:
        raise DomainError(f"experiments support 2 <= k <= 8, got {k}")


def _check_plan(plan: SamplingPlan, X: float, interval_mode: str):
    if plan.X != X:
        raise PreconditionError(f"plan.X={plan.X} does not match X={X}")
    if plan.interval_mode != interval_mode:
        raise PreconditionError(f"this experiment needs interval_mode={interval_mode!r}")


def variance_short(
    k: int,
    X: float,
    L: float,
    theta: float,
    plan: SamplingPlan,
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> VarianceReport:
    """Mean square of Delta_k(x + x^(1-1/k)/L) - Delta_k(x) over [X, 2X]."""
    _check_k(k)
    if L < 2:
        raise DomainError(f"L must be >= 2, got {L}")
    _check_plan(plan, X, "x-dependent")
    t0 = time.perf_counter()
    xs = plan.points()
    hs = increment_length(k, xs, L)
    if np.all(hs < 1):
        warnings.warn(
            "every interval is shorter than 1; increments reflect main-term drift only",
            DegenerateIntervalWarning,
            stacklevel=2,
        )
    inc = delta_increments(k, xs, hs, segment_size, workers)
    mean, ms, se = _summarize(inc)

    a_k = default_a_k(k)
    leading = c_constant(k, a_k) * X ** (1 - 1 / k) / L * math.log(L) ** (k * k - 1)
    N = floor_power(X, theta)
    proxy = m_script(k, N, L, X, segment_size=segment_size, workers=workers)
    p_ms = p_se = None
    if N * xs.size <= P_EVAL_BUDGET:
        spec = build_spec(k, theta, X)
        _, p_ms, p_se = _summarize(eval_increment(spec, xs, L))
    return VarianceReport(
        k=k, X=X, regime="short", samples=plan.samples, seed=plan.seed,
        empirical_mean=mean, empirical_variance=ms, standard_error=se,
        prediction=leading, prediction_proxy=proxy, L=L, theta=theta,
        exploration=k >= 4, seconds=time.perf_counter() - t0, plan=plan.as_dict(),
        extras={
            "terms": N,
            "p_increment_mean_square": p_ms,
            "p_increment_stderr": p_se,
            "correction_scale": 1.0 / math.log(L),
        },
    )


def variance_longH(
    k: int,
    X: float,
    H: float,
    plan: SamplingPlan,
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> VarianceReport:
    """Mean square of Delta_k(x + H) - Delta_k(x) against B_k X^(1-1/k)."""
    _check_k(k)
    if not 0 < H < X:
        raise PreconditionError(f"H must lie in (0, X), got H={H}")
    _check_plan(plan, X, "fixed")
    if H <= X ** (1 - 1 / k):
        warnings.warn(
            f"H={H:.4g} is below X^(1-1/k); the uncorrelated regime does not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    t0 = time.perf_counter()
    xs = plan.points()
    inc = delta_increments(k, xs, np.full(xs.size, float(H)), segment_size, workers)
    mean, ms, se = _summarize(inc)
    B = constants_bundle(k).B_k
    return VarianceReport(
        k=k, X=X, regime="longH", samples=plan.samples, seed=plan.seed,
        empirical_mean=mean, empirical_variance=ms, standard_error=se,
        prediction=B * X ** (1 - 1 / k), H=H, exploration=k >= 4,
        seconds=time.perf_counter() - t0, plan=plan.as_dict(), extras={"B_k": B},
    )


def variance_ivic(
    X: float,
    L: float,
    plan: SamplingPlan,
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> VarianceReport:
    """k = 2 with fixed H = X^(1/2)/L against (8/pi^2) (X^(1/2)/L) (log L)^3."""
    _check_plan(plan, X, "fixed")
    H = math.sqrt(X) / L
    if not 0 < H < X:
        raise PreconditionError(f"H = X^(1/2)/L must lie in (0, X), got {H}")
    if H < 1:
        warnings.warn(
            f"H={H:.3g} < 1: intervals hold at most one integer", DegenerateIntervalWarning, stacklevel=2
        )
    t0 = time.perf_counter()
    xs = plan.points()
    inc = delta_increments(2, xs, np.full(xs.size, H), segment_size, workers)
    mean, ms, se = _summarize(inc)
    return VarianceReport(
        k=2, X=X, regime="ivic", samples=plan.samples, seed=plan.seed,
        empirical_mean=mean, empirical_variance=ms, standard_error=se,
        prediction=ivic_leading(X, L), L=L, H=H,
        seconds=time.perf_counter() - t0, plan=plan.as_dict(),
        extras={"correction_scale": 1.0 / math.log(L) if L > 1 else None},
    )


def residual_bound(k: int, theta: float, X: float, mode: str) -> float:
    """Upper-bound envelope (without the X^eps) for the mean square of Delta_k - P_k."""
    if mode == "unconditional" and k == 3:
        return X ** (2.0 / 3.0 - theta / 6.0)
    return X ** (1.0 - (1.0 + theta) / k)


def residual_prop(
    k: int,
    theta: float,
    X: float,
    plan: SamplingPlan,
    mode: str | None = None,
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> VarianceReport:
    """Mean square of Delta_k(x) - P_k(x; theta) over the plan, with the bound envelope."""
    _check_k(k)
    if mode is None:
        mode = "unconditional" if k <= 3 else "lindelof"
    if mode not in ("unconditional", "lindelof"):
        raise PreconditionError(f"unknown mode {mode!r}")
    if mode == "unconditional" and k > 3:
        raise PreconditionError("no unconditional residual bound for k >= 4")
    top = 0.5 if (mode == "unconditional" and k == 3) else 1.0 / (k - 1)
    if not 0 < theta <= top + 1e-12:
        raise PreconditionError(f"theta must lie in (0, {top:.4g}] for k={k} in {mode} mode")
    _check_plan(plan, X, plan.interval_mode)
    t0 = time.perf_counter()
    xs = plan.points()
    spec = build_spec(k, theta, X)
    d = delta_k(k, xs, segment_size, workers)
    resid = d - eval_P(spec, xs)
    mean, ms, se = _summarize(resid)
    _, d_ms, _ = _summarize(d)
    return VarianceReport(
        k=k, X=X, regime="residual", samples=plan.samples, seed=plan.seed,
        empirical_mean=mean, empirical_variance=ms, standard_error=se,
        prediction=residual_bound(k, theta, X, mode), prediction_kind="upper_bound",
        theta=theta, exploration=(mode == "lindelof" and k >= 3),
        seconds=time.perf_counter() - t0, plan=plan.as_dict(),
        extras={"terms": spec.N, "delta_mean_square": d_ms, "mode": mode},
    )


def covariance_report(k: int, X: float, H: float, theta: float, plan: SamplingPlan) -> VarianceReport:
    """Empirical covariance of P_k(x + H) and P_k(x); mean field is the covariance."""
    _check_k(k)
    t0 = time.perf_counter()
    spec = build_spec(k, theta, X)
    est = covariance_estimate(spec, X, H, plan)
    return VarianceReport(
        k=k, X=X, regime="covariance", samples=plan.samples, seed=plan.seed,
        empirical_mean=est.covariance, empirical_variance=est.mean_square,
        standard_error=est.standard_error, prediction=None, H=H, theta=theta,
        prediction_kind="none", seconds=time.perf_counter() - t0, plan=plan.as_dict(),
        extras={"terms": spec.N, "relative_covariance": est.covariance / est.mean_square},
    )
