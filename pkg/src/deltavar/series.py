"""Truncated Laurent series about s = 1 and the residue main term of Delta_k.

A :class:`LaurentSeries` stores coefficients of (s-1)^e for
lead_order <= e < truncation_order; everything from (s-1)^truncation_order on
is unknown, and arithmetic propagates that boundary exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .errors import DomainError, UnsupportedOrderError

MAX_STIELTJES = 8
_EM_DPS = 40
_EM_N = 20
_EM_TERMS = 24


@dataclass(frozen=True)
class LaurentSeries:
    lead_order: int
    coeffs: tuple
    truncation_order: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.truncation_order - self.lead_order != len(self.coeffs):
            raise ValueError("len(coeffs) must equal truncation_order - lead_order")

    @classmethod
    def from_coeffs(cls, lead_order: int, coeffs: Sequence[float]) -> "LaurentSeries":
        return cls(lead_order, tuple(coeffs), lead_order + len(coeffs))

    @classmethod
    def constant(cls, c: float, truncation_order: int) -> "LaurentSeries":
        return cls(0, (c,) + (0.0,) * (truncation_order - 1), truncation_order)

    def __getitem__(self, e: int) -> float:
        """Coefficient of (s-1)^e."""
        if e >= self.truncation_order:
            raise IndexError(f"(s-1)^{e} lies beyond the truncation order {self.truncation_order}")
        if e < self.lead_order:
            return 0.0
        return self.coeffs[e - self.lead_order]

    def _aligned(self, lo: int, hi: int) -> np.ndarray:
        return np.array([self[e] if e < self.truncation_order else 0.0 for e in range(lo, hi)])

    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            other = LaurentSeries.constant(other, max(self.truncation_order, 1))
        lo = min(self.lead_order, other.lead_order)
        hi = min(self.truncation_order, other.truncation_order)
        return LaurentSeries(lo, tuple(self._aligned(lo, hi) + other._aligned(lo, hi)), hi)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.lead_order, tuple(-c for c in self.coeffs), self.truncation_order)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return LaurentSeries(
                self.lead_order, tuple(c * other for c in self.coeffs), self.truncation_order
            )
        lead = self.lead_order + other.lead_order
        trunc = min(
            self.lead_order + other.truncation_order,
            other.lead_order + self.truncation_order,
        )
        n = trunc - lead
        prod = np.convolve(np.asarray(self.coeffs), np.asarray(other.coeffs))[:n]
        if len(prod) < n:
            prod = np.concatenate([prod, np.zeros(n - len(prod))])
        return LaurentSeries(lead, tuple(prod), trunc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("only non-negative integer powers")
        out = LaurentSeries.constant(1.0, self.truncation_order - self.lead_order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out


# -- Euler-Maclaurin evaluations -----------------------------------------------

@lru_cache(maxsize=None)
def _stieltjes_mp(m: int):
    """gamma_m by Euler-Maclaurin applied to sum (log n)^m / n."""
    with mpmath.workdps(_EM_DPS):
        N = _EM_N
        lnN = mpmath.log(N)
        total = mpmath.fsum(mpmath.log(n) ** m / n for n in range(1, N))
        total += lnN ** m / (2 * N)
        total -= lnN ** (m + 1) / (m + 1)
        # f^(r)(x) = x^(-1-r) * sum_i c[i] (log x)^i, starting from f = (log x)^m / x
        c = [mpmath.mpf(0)] * m + [mpmath.mpf(1)]
        r = 0
        for j in range(1, _EM_TERMS + 1):
            while r < 2 * j - 1:
                nc = [mpmath.mpf(0)] * len(c)
                for i, ci in enumerate(c):
                    nc[i] -= (1 + r) * ci
                    if i:
                        nc[i - 1] += i * ci
                c = nc
                r += 1
            deriv = mpmath.fsum(ci * lnN ** i for i, ci in enumerate(c)) / mpmath.mpf(N) ** (1 + r)
            total -= mpmath.bernoulli(2 * j) / mpmath.factorial(2 * j) * deriv
        return +total


def stieltjes(m: int) -> float:
    """Stieltjes constant gamma_m for 0 <= m <= 8."""
    if m < 0 or m > MAX_STIELTJES:
        raise UnsupportedOrderError(f"stieltjes order {m} outside 0..{MAX_STIELTJES}")
    return float(_stieltjes_mp(m))


def zeta_real(s: float) -> float:
    """Riemann zeta at real s > 1 by Euler-Maclaurin with tail correction."""
    if not s > 1:
        raise DomainError(f"zeta_real needs s > 1, got {s}")
    with mpmath.workdps(_EM_DPS):
        s = mpmath.mpf(s)
        N = _EM_N
        total = mpmath.fsum(mpmath.mpf(n) ** -s for n in range(1, N))
        total += mpmath.mpf(N) ** (1 - s) / (s - 1) + mpmath.mpf(N) ** -s / 2
        rising = s
        for j in range(1, _EM_TERMS + 1):
            if j > 1:
                rising *= (s + 2 * j - 3) * (s + 2 * j - 2)
            total += (
                mpmath.bernoulli(2 * j) / mpmath.factorial(2 * j) * rising * mpmath.mpf(N) ** (-s - 2 * j + 1)
            )
        return float(total)


# -- residue main term ---------------------------------------------------------

def zeta_laurent(order: int) -> LaurentSeries:
    """zeta(s) = 1/(s-1) + sum_m (-1)^m gamma_m (s-1)^m / m!, known to O((s-1)^order)."""
    coeffs = [1.0] + [
        (-1) ** m * float(_stieltjes_mp(m)) / math.factorial(m) for m in range(order)
    ]
    return LaurentSeries(-1, tuple(coeffs), order)


def inverse_s(order: int) -> LaurentSeries:
    """1/s = sum_i (-1)^i (s-1)^i."""
    return LaurentSeries(0, tuple((-1.0) ** i for i in range(order)), order)


def residue_poly(series: LaurentSeries, pole: int) -> np.ndarray:
    """Coefficients c_j with Res_{s=1} series(s) x^s / s = x * sum_j c_j (log x)^j.

    ``series`` has a pole of order ``pole`` at s = 1.  Multiplying by 1/s and
    by x^(s-1) = sum_j (log x)^j (s-1)^j / j! leaves c_j = A[-1-j] / j!, where
    A = series / s.
    """
    a = series * inverse_s(series.truncation_order - series.lead_order + 1)
    assert a.truncation_order >= 0, "truncation too short for the residue"
    return np.array([a[-1 - j] / math.factorial(j) for j in range(pole)])


@dataclass(frozen=True)
class MainTermPolynomial:
    """Main term x * sum_j coeffs[j] (log x)^j."""

    k: int
    coeffs: tuple

    def __call__(self, x):
        return eval_main_term(self, x)


@lru_cache(maxsize=None)
def main_term_poly(k: int) -> MainTermPolynomial:
    """Residue of zeta^k(s) x^s / s at s = 1 as a polynomial in log x."""
    if k < 1 or k > 8:
        raise DomainError(f"main_term_poly supports 1 <= k <= 8, got {k}")
    order = k + 4
    z = zeta_laurent(order) ** k
    assert z.lead_order == -k and z.truncation_order >= 0, "insufficient truncation order"
    coeffs = residue_poly(z, k)
    return MainTermPolynomial(k=k, coeffs=tuple(float(c) for c in coeffs))


def eval_main_term(poly: MainTermPolynomial, x):
    """x * R(log x); accepts scalars or arrays with x >= 1."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 1):
        raise DomainError("eval_main_term needs x >= 1")
    t = np.log(xa)
    r = np.zeros_like(t)
    for c in reversed(poly.coeffs):
        r = r * t + c
    out = xa * r
    return float(out) if out.ndim == 0 else out
