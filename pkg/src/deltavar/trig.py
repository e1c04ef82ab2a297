"""Trigonometric approximants P_k(x; theta) to Delta_k and their mean values.

    P_k(x; theta) = x^(1/2 - 1/(2k)) / (pi sqrt k)
                    * sum_{n <= X^theta} d_k(n) n^(-1/2 - 1/(2k)) cos(2 pi k (n x)^(1/k) + (k-3) pi / 4)

Phases are carried in turns (units of 2 pi) and reduced modulo 1 before the
cosine, so large arguments lose no more than the rounding of the product.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit, prange

from .errors import CapacityError, DomainError, NumericValidityError, PreconditionError
from .sampling import SamplingPlan, stratified_mean
from .sieve import build_table

DEFAULT_TERM_BUDGET = 10**7
PHASE_BOUND = 1e14  # max x * N keeping ~1e-9 absolute phase accuracy


@dataclass(frozen=True)
class TrigPolynomialSpec:
    k: int
    theta: float
    X: float
    N: int
    amps: np.ndarray
    freqs: np.ndarray
    phase: float

    @property
    def prefactor_power(self) -> float:
        return 0.5 - 0.5 / self.k


def floor_power(X: float, theta: float) -> int:
    """floor(X^theta), robust to X^theta landing a hair below an integer."""
    v = X**theta
    n = math.floor(v)
    if n + 1 <= v * (1 + 1e-12):
        n += 1
    return int(n)


def build_spec(
    k: int, theta: float, X: float, term_budget: int = DEFAULT_TERM_BUDGET
) -> TrigPolynomialSpec:
    if k < 2:
        raise DomainError(f"P_k needs k >= 2, got {k}")
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    if X < 2:
        raise DomainError(f"X must be >= 2, got {X}")
    if theta > 1.0 / (k - 1) + 1e-12:
        warnings.warn(
            f"theta={theta} exceeds 1/(k-1)={1 / (k - 1):.4g}; the mean-square approximation is unproven there",
            RuntimeWarning,
            stacklevel=2,
        )
    N = floor_power(X, theta)
    if N > term_budget:
        raise CapacityError(f"{N} terms exceed the term budget {term_budget}")
    if 2.0 * X * N > PHASE_BOUND:
        raise NumericValidityError(
            f"x*N up to {2.0 * X * N:.3g} exceeds the phase-accuracy bound {PHASE_BOUND:.0e}"
        )
    n = np.arange(1, N + 1, dtype=float)
    d = build_table(k, N).values.astype(float)
    amps = d * n ** (-0.5 - 0.5 / k)
    freqs = n ** (1.0 / k)
    for a in (amps, freqs):
        a.setflags(write=False)
    return TrigPolynomialSpec(
        k=k, theta=float(theta), X=float(X), N=N, amps=amps, freqs=freqs, phase=(k - 3) * math.pi / 4
    )


@njit(nogil=True, parallel=True, cache=True)
def _cos_sums(roots, amps, turns, phase):
    # out[i] = sum_n amps[n] cos(2 pi frac(turns[n] * roots[i]) + phase), Neumaier-compensated
    out = np.empty(roots.shape[0])
    two_pi = 2.0 * math.pi
    for i in prange(roots.shape[0]):
        s = 0.0
        c = 0.0
        r = roots[i]
        for j in range(amps.shape[0]):
            y = turns[j] * r
            y -= math.floor(y)
            v = amps[j] * math.cos(two_pi * y + phase)
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        out[i] = s + c
    return out


def eval_P(spec: TrigPolynomialSpec, x):
    """P_k(x; theta) at scalar or array x (term count fixed by the polynomial's X)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    k = spec.k
    roots = xa ** (1.0 / k)
    sums = _cos_sums(roots, spec.amps, k * spec.freqs, spec.phase)
    out = xa**spec.prefactor_power / (math.pi * math.sqrt(k)) * sums
    return float(out[0]) if np.ndim(x) == 0 else out


def increment_length(k: int, x, L: float):
    return np.asarray(x, dtype=float) ** (1.0 - 1.0 / k) / L


def eval_increment(spec: TrigPolynomialSpec, x, L: float):
    """P(x + x^(1-1/k)/L) - P(x)."""
    if L < 2:
        raise DomainError(f"L must be >= 2, got {L}")
    xa = np.asarray(x, dtype=float)
    out = eval_P(spec, xa + increment_length(spec.k, xa, L)) - eval_P(spec, xa)
    return float(out) if np.ndim(x) == 0 else out


# -- mean value of exponential sums --------------------------------------------

def mvt_diagonal(coeffs: Sequence[complex], alpha: float, X: float, k: int | None = None) -> float:
    """Diagonal main term sum |a_n|^2 (2^(1+alpha)-1)/(1+alpha) X^(1+alpha)."""
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    a = np.asarray(coeffs, dtype=complex)
    w = (2.0 ** (1 + alpha) - 1) / (1 + alpha) * X ** (1 + alpha)
    return math.fsum(np.abs(a) ** 2) * w


def required_nodes(N: int, X: float, k: int, per_cycle: int = 20) -> int:
    """Nodes needed for ``per_cycle`` samples per oscillation of the fastest term."""
    cycles = k * N ** (1.0 / k) * ((2 * X) ** (1.0 / k) - X ** (1.0 / k))
    return int(math.ceil(per_cycle * max(cycles, 1.0)))


def exp_sum(coeffs, x, k: int):
    """sum_n a_n e(k (n x)^(1/k)) at the points x."""
    a = np.asarray(coeffs, dtype=complex)
    n = np.arange(1, a.size + 1, dtype=float)
    turns = k * np.outer((np.asarray(x, dtype=float)) ** (1.0 / k), n ** (1.0 / k))
    turns -= np.floor(turns)
    return np.exp(2j * np.pi * turns) @ a


def mvt_quadrature(
    coeffs: Sequence[complex], alpha: float, X: float, k: int, node_budget: int = 1 << 16
) -> float:
    """int_X^2X x^alpha |sum a_n e(k (n x)^(1/k))|^2 dx by composite Gauss-Legendre."""
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    a = np.asarray(coeffs, dtype=complex)
    if a.size == 0 or not np.any(a):
        return 0.0
    need = required_nodes(a.size, X, k)
    if node_budget < need:
        raise PreconditionError(f"node budget {node_budget} below the {need} nodes the frequencies require")
    order = 16
    panels = max(1, node_budget // order)
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(X, 2 * X, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    vals = x**alpha * np.abs(exp_sum(a, x, k)) ** 2
    return math.fsum(w * vals)


# -- covariance ----------------------------------------------------------------

class CovarianceEstimate(NamedTuple):
    covariance: float
    standard_error: float
    mean_square: float


def covariance_estimate(spec: TrigPolynomialSpec, X: float, H: float, plan: SamplingPlan) -> CovarianceEstimate:
    if H < 0:
        raise PreconditionError("H must be >= 0")
    if plan.X != X:
        raise PreconditionError("plan.X must match X")
    x = plan.points()
    p0 = eval_P(spec, x)
    pH = p0 if H == 0 else eval_P(spec, x + H)
    cov, se = stratified_mean(pH * p0)
    ms, _ = stratified_mean(p0 * p0)
    return CovarianceEstimate(cov, se, ms)


def empirical_covariance(spec: TrigPolynomialSpec, X: float, H: float, plan: SamplingPlan) -> float:
    """(1/X) int_X^2X P(x+H) P(x) dx estimated over the plan."""
    return covariance_estimate(spec, X, H, plan).covariance
