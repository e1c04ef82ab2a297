"""Arithmetic constants a_k, C_k, B_k, b_{k^2-1} and the predicted asymptotics.

The arithmetic factor is the Euler product

    g(s) = prod_p (1 - p^-s)^(k^2) * sum_j (Gamma(k+j) / (Gamma(k) j!))^2 p^(-js)

with a_k = g(1).  Sums of d_k(n)^2 n^-s are then zeta^(k^2)(s) g(s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .series import LaurentSeries, MAX_STIELTJES, residue_poly, zeta_laurent
from .sieve import (
    DEFAULT_SEGMENT,
    PowerWeight,
    Sin2Weight,
    iter_segments,
    primes_upto,
    weighted_sums_dk2,
    _sum_sq_power,
)

DEFAULT_PRIME_LIMIT = 10**6
DEFAULT_CUTOFF = 10**7
_LOCAL_TOL = 1e-15


@dataclass(frozen=True)
class EulerProduct:
    value: float
    error: float
    prime_limit: int


def _log_local_factors(k: int, s: float, primes: np.ndarray) -> np.ndarray:
    """log of each local factor, the j-series summed until its tail is negligible."""
    w = primes.astype(float) ** (-s)
    total = np.ones_like(w)
    term = np.ones_like(w)
    active = np.arange(w.size)
    j = 0
    while active.size:
        j += 1
        # C(j+k-1, j)^2 / C(j+k-2, j-1)^2 = ((j+k-1)/j)^2
        term[active] *= ((j + k - 1) / j) ** 2 * w[active]
        total[active] += term[active]
        # the ratio of consecutive terms tends to w < 1 from above
        ratio = ((j + k) / (j + 1)) ** 2 * w[active]
        tail = np.where(ratio < 1, term[active] * ratio / (1 - ratio), np.inf)
        active = active[tail > _LOCAL_TOL * total[active]]
    return k * k * np.log1p(-w) + np.log(total)


def euler_g(k: int, s: float, prime_limit: int = DEFAULT_PRIME_LIMIT) -> EulerProduct:
    """g(s) truncated to p <= prime_limit, with the P vs P/10 difference as error."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not s > 0.5:
        raise DomainError(f"the Euler product for g(s) diverges for s <= 1/2 (s={s})")
    if prime_limit < 2:
        raise DomainError("prime_limit must be >= 2")
    primes = primes_upto(prime_limit)
    logs = _log_local_factors(k, float(s), primes)
    value = math.exp(math.fsum(logs))
    coarse_n = int(np.searchsorted(primes, prime_limit // 10, side="right"))
    coarse = math.exp(math.fsum(logs[:coarse_n]))
    return EulerProduct(value=value, error=abs(value - coarse), prime_limit=prime_limit)


def _log_g_taylor(k: int, order: int, prime_limit: int) -> np.ndarray:
    """Taylor coefficients of log g(1+u) in u, through u^(order-1).

    Uses the closed local form (1-w)^((k-1)^2) * sum_i C(k-1,i)^2 w^i with
    w = p^(-1) exp(-u log p); identical to the defining series factor.
    """
    primes = primes_upto(prime_limit).astype(float)
    lp = np.log(primes)
    idx = np.arange(order)
    fact = np.array([math.factorial(i) for i in idx], dtype=float)
    W = (1.0 / primes)[:, None] * (-lp[:, None]) ** idx / fact  # (P, order)

    def mul(a, b):
        out = np.zeros_like(a)
        for i in range(order):
            out[:, i:] += a[:, i : i + 1] * b[:, : order - i]
        return out

    def log_series(a):
        b = np.zeros_like(a)
        b[:, 0] = np.log(a[:, 0])
        for n in range(1, order):
            acc = n * a[:, n]
            for j in range(1, n):
                acc = acc - j * b[:, j] * a[:, n - j]
            b[:, n] = acc / (n * a[:, 0])
        return b

    one_minus = -W
    one_minus[:, 0] += 1.0
    num = np.zeros_like(W)
    for i in reversed(range(k)):
        num = mul(num, W)
        num[:, 0] += math.comb(k - 1, i) ** 2
    per_prime = (k - 1) ** 2 * log_series(one_minus) + log_series(num)
    return np.array([math.fsum(per_prime[:, i]) for i in range(order)])


@lru_cache(maxsize=None)
def summatory_poly(k: int, prime_limit: int = DEFAULT_PRIME_LIMIT) -> np.ndarray | None:
    """Coefficients b_0..b_{k^2-1} of Q with sum_{n<=N} d_k(n)^2 ~ N Q(log N).

    Needs Stieltjes constants up to k^2 - 1, so only k <= 3 is available;
    returns None otherwise.
    """
    K = k * k
    if K - 1 > MAX_STIELTJES:
        return None
    lg = _log_g_taylor(k, K, prime_limit)
    # exponentiate the log series
    g = np.zeros(K)
    g[0] = math.exp(lg[0])
    for n in range(1, K):
        g[n] = sum(j * lg[j] * g[n - j] for j in range(1, n + 1)) / n
    z = zeta_laurent(K) ** K
    series = z * LaurentSeries(0, tuple(g), K)
    return residue_poly(series, K)


@dataclass(frozen=True)
class ConstantBundle:
    k: int
    a_k: float
    C_k: float
    B_k: float
    b_top: float
    provenance: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        p = self.provenance
        return {
            "k": self.k,
            "a_k": self.a_k,
            "C_k": self.C_k,
            "B_k": self.B_k,
            "b_top": self.b_top,
            "prime_limit": p.get("prime_limit"),
            "cutoff": p.get("cutoff"),
            "est_error": p.get("est_error"),
        }


def interval_factor(k: int) -> float:
    """(2^(2-1/k) - 1) / (2 - 1/k), which is the integral of x^(1-1/k) over [1, 2]."""
    a = 2.0 - 1.0 / k
    return (2.0**a - 1.0) / a


def interval_factor_quad(k: int) -> float:
    return integrate.quad(lambda x: x ** (1.0 - 1.0 / k), 1.0, 2.0, epsabs=1e-14, epsrel=1e-13)[0]


def c_constant(k: int, a_k: float, integral_form: bool = False) -> float:
    f = interval_factor_quad(k) if integral_form else interval_factor(k)
    return f * k ** (k * k - 1) / math.factorial(k * k - 1) * a_k


def _tail_integral(coeffs: np.ndarray, N: float, k: int) -> float:
    """int_N^inf t^(-1-1/k) (Q(log t) + Q'(log t)) dt for polynomial Q."""
    q = np.polynomial.Polynomial(coeffs)
    p = q + q.deriv()
    a = math.log(N) / k
    # int_{log N}^inf e^(-v/k) v^j dv = k^(j+1) Gamma(j+1, log N / k)
    return math.fsum(
        c * k ** (j + 1) * special.gammaincc(j + 1, a) * math.gamma(j + 1)
        for j, c in enumerate(p.coef)
    )


@lru_cache(maxsize=None)
def default_a_k(k: int) -> float:
    return euler_g(k, 1.0, DEFAULT_PRIME_LIMIT).value


@lru_cache(maxsize=None)
def constants_bundle(
    k: int,
    prime_limit: int = DEFAULT_PRIME_LIMIT,
    cutoff: int = DEFAULT_CUTOFF,
    segment_size: int = DEFAULT_SEGMENT,
) -> ConstantBundle:
    """a_k, C_k, B_k and b_{k^2-1} with their provenance and error estimates."""
    if not 2 <= k <= 6:
        raise DomainError(f"constants_bundle supports 2 <= k <= 6, got {k}")
    K = k * k
    eg = euler_g(k, 1.0, prime_limit)
    a_k = eg.value
    C_k = c_constant(k, a_k)
    b_top = a_k / math.factorial(K - 1)
    sigma = 1.0 + 1.0 / k

    def seg(a, dk):
        sq = int(np.dot(dk, dk)) if dk.max() ** 2 * dk.size < (1 << 62) else sum(int(v) ** 2 for v in dk)
        return _sum_sq_power(a, dk, sigma), sq

    parts, count = [], 0
    for (s, c), sq in iter_segments(k, 1, cutoff + 1, seg, segment_size):
        parts += [s, c]
        count += sq
    head = math.fsum(parts)

    poly = summatory_poly(k, prime_limit)
    tail_kind = "full" if poly is not None else "leading"
    if poly is None:
        poly = np.zeros(K)
        poly[-1] = b_top
    # replace the discrete tail sum_{n>N} by the smooth one plus the boundary term
    remainder = count - cutoff * float(np.polynomial.Polynomial(poly)(math.log(cutoff)))
    tail = _tail_integral(poly, cutoff, k) - remainder * cutoff ** (-sigma)
    # the summatory error grows like t^(1-1/k^2); integrate that growth past the cutoff
    tail_err = abs(remainder) * cutoff ** (-sigma) * (1.0 + sigma / (sigma - 1.0 + 1.0 / K))
    dirichlet = head + tail
    pref = interval_factor(k) / (math.pi**2 * k)
    B_k = pref * dirichlet
    factor_err = eg.error / a_k
    provenance = {
        "prime_limit": prime_limit,
        "cutoff": cutoff,
        "tail_model": tail_kind,
        "dirichlet_head": head,
        "dirichlet_tail": tail,
        "est_error": {
            "a_k": eg.error,
            "C_k": C_k * factor_err,
            "b_top": b_top * factor_err,
            "B_k": pref * tail_err,
        },
    }
    return ConstantBundle(k=k, a_k=a_k, C_k=C_k, B_k=B_k, b_top=b_top, provenance=provenance)


def m_prefactor(k: int) -> float:
    return 2.0 * interval_factor(k) / (math.pi**2 * k)


def m_script(k: int, N: int, L: float, X: float, **kw) -> float:
    """X^(1-1/k) * 2 (2^(2-1/k)-1) / (pi^2 k (2-1/k)) * sum_{n<=N} d_k(n)^2 n^(-1-1/k) sin^2(pi n^(1/k)/L)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    s = weighted_sums_dk2(k, int(N), [Sin2Weight(L)], **kw)[0]
    return X ** (1.0 - 1.0 / k) * m_prefactor(k) * s


def partial_summation_leading(k: int, L: float, a_k: float | None = None) -> float:
    """(k^(k^2) pi^2 / (2 Gamma(k^2))) a_k (log L)^(k^2-1) / L."""
    if L < 2:
        raise DomainError(f"L must be >= 2, got {L}")
    if a_k is None:
        a_k = default_a_k(k)
    K = k * k
    return k**K * math.pi**2 / (2.0 * math.factorial(K - 1)) * a_k * math.log(L) ** (K - 1) / L


def _sinc2(u: float) -> float:
    if u < 1e-4:
        # removable singularity: pi^2 (1 - (pi u)^2 / 3 + ...)
        return math.pi**2 * (1.0 - (math.pi * u) ** 2 / 3.0)
    return (math.sin(math.pi * u) / u) ** 2


def sinc2_integral(upper: float | None = None, split: int = 64) -> float:
    """int_0^upper sin^2(pi u)/u^2 du by adaptive quadrature (upper=None means infinity)."""
    U = float(split if upper is None else upper)
    edges = np.linspace(0.0, U, int(math.ceil(U)) + 1)
    head = math.fsum(
        integrate.quad(_sinc2, a, b, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(edges, edges[1:])
    )
    if upper is not None:
        return head
    # sin^2 = (1 - cos 2 pi u) / 2; the cosine part is a Fourier integral on [U, inf)
    cos_part = integrate.quad(lambda u: 1.0 / u**2, U, np.inf, weight="cos", wvar=2 * math.pi)[0]
    return head + 1.0 / (2.0 * U) - 0.5 * cos_part


def ivic_leading(X: float, L: float) -> float:
    """(8/pi^2) (X^(1/2)/L) (log L)^3."""
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    return 8.0 / math.pi**2 * math.sqrt(X) / L * math.log(L) ** 3
