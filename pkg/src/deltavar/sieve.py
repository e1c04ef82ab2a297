"""Exact divisor-function tables, streaming prefix sums and sums of d_k(n)^2.

The in-memory table is built with a linear sieve.  Everything that has to
reach 10^8 and beyond streams through fixed-size segments instead: for each
segment the prime powers p^e (p <= sqrt(hi)) are walked and the running value
d_k(n) is updated by the ratio C(e+k-1, e) / C(e+k-2, e-1) = (e+k-1)/e, while
the product of the extracted prime powers is tracked so that a leftover
cofactor > 1 (necessarily a prime) contributes the final factor k.
"""
from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence, Union

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, NumericValidityError, PreconditionError

DEFAULT_SEGMENT = 1 << 20
DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes
MAX_K = 16
U32_LIMIT = 1 << 32


def _check_k(k: int) -> None:
    if k < 1:
        raise DomainError(f"fold-count k must be >= 1, got {k}")
    if k > MAX_K:
        raise DomainError(f"fold-count k={k} exceeds supported maximum {MAX_K}")


@dataclass(frozen=True)
class DivisorTable:
    """Values d_k(n) for start <= n < end (values[i] = d_k(start + i))."""

    k: int
    start: int
    end: int
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.end - self.start:
            raise PreconditionError("table length does not match [start, end)")
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return self.end - self.start

    def __getitem__(self, n: int) -> int:
        if not self.start <= n < self.end:
            raise IndexError(n)
        return int(self.values[n - self.start])

    def prefix_sums(self) -> np.ndarray:
        """Cumulative sums over the table, as int64."""
        return np.cumsum(self.values, dtype=np.int64)


@dataclass(frozen=True)
class PrefixCheckpoint:
    x: float
    prefix: int


# -- small primes --------------------------------------------------------------

def primes_upto(n: int) -> np.ndarray:
    """Primes p <= n by the sieve of Eratosthenes."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    mask = np.ones(n + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return np.flatnonzero(mask).astype(np.int64)


# -- numba kernels -------------------------------------------------------------

@njit(nogil=True, cache=True)
def _linear_sieve(N, k, out):
    # out[n] = d_k(n) for 1 <= n <= N (index 0 unused); returns max or -1 on u32 overflow
    expo = np.zeros(N + 1, np.uint8)
    primes = np.empty(max(16, int(1.3 * N / max(1.0, np.log(N + 1.0))) + 16), np.int64)
    nprimes = 0
    out[1] = 1
    vmax = 1
    for i in range(2, N + 1):
        if expo[i] == 0:
            primes[nprimes] = i
            nprimes += 1
            expo[i] = 1
            out[i] = k
            if k > vmax:
                vmax = k
        fi = np.int64(out[i])
        for j in range(nprimes):
            p = primes[j]
            m = i * p
            if m > N:
                break
            if i % p == 0:
                e = np.int64(expo[i])
                v = fi * (e + k) // (e + 1)
                expo[m] = e + 1
                if v >= 4294967296:
                    return -1
                out[m] = v
                if v > vmax:
                    vmax = v
                break
            v = fi * k
            expo[m] = 1
            if v >= 4294967296:
                return -1
            out[m] = v
            if v > vmax:
                vmax = v
    return vmax


@njit(nogil=True, cache=True)
def _segment_dk(lo, hi, k, primes, out):
    # out[i] = d_k(lo + i) for lo <= n < hi, lo >= 1
    m = hi - lo
    pp = np.ones(m, np.int64)
    for i in range(m):
        out[i] = 1
    top = hi - 1
    for j in range(primes.shape[0]):
        p = primes[j]
        if p * p > top:
            break
        q = p
        e = 1
        while True:
            start = ((lo + q - 1) // q) * q
            for n in range(start, hi, q):
                idx = n - lo
                pp[idx] *= p
                if e == 1:
                    out[idx] *= k
                else:
                    out[idx] = out[idx] * (e + k - 1) // e
            if q > top // p:
                break
            q *= p
            e += 1
    for i in range(m):
        if pp[i] != lo + i:
            out[i] *= k


@njit(nogil=True, cache=True)
def _neumaier_add(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


@njit(nogil=True, cache=True)
def _sum_sq_power(lo, dk, s_exp):
    s = 0.0
    c = 0.0
    for i in range(dk.shape[0]):
        d = float(dk[i])
        n = float(lo + i)
        s, c = _neumaier_add(s, c, d * d * n ** (-s_exp))
    return s, c


@njit(nogil=True, cache=True)
def _sum_sq_sin2(lo, dk, k, L):
    s = 0.0
    c = 0.0
    inv_k = 1.0 / k
    for i in range(dk.shape[0]):
        d = float(dk[i])
        n = float(lo + i)
        sn = math.sin(math.pi * n ** inv_k / L)
        s, c = _neumaier_add(s, c, d * d * n ** (-1.0 - inv_k) * sn * sn)
    return s, c


# -- table construction --------------------------------------------------------

def build_table(k: int, N: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> DivisorTable:
    """d_k(n) for 1 <= n <= N by a linear sieve (O(N) time)."""
    _check_k(k)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    need = 5 * (N + 1) + 8 * (N // 8 + 16)
    if need > memory_budget:
        raise CapacityError(f"table for N={N} needs ~{need} bytes > budget {memory_budget}")
    out = np.zeros(N + 1, dtype=np.uint32)
    vmax = _linear_sieve(N, k, out)
    if vmax < 0:
        raise NumericValidityError(f"d_{k}(n) exceeds 2^32 for some n <= {N}")
    return DivisorTable(k=k, start=1, end=N + 1, values=out[1:])


def segment_values(k: int, lo: int, hi: int, primes: np.ndarray | None = None) -> np.ndarray:
    """d_k(n) for lo <= n < hi as int64, computed by the segmented kernel."""
    _check_k(k)
    if lo < 1 or hi < lo:
        raise PreconditionError(f"bad segment [{lo}, {hi})")
    if primes is None:
        primes = primes_upto(math.isqrt(max(hi - 1, 1)))
    out = np.empty(hi - lo, dtype=np.int64)
    if hi > lo:
        _segment_dk(lo, hi, k, primes, out)
    return out


def _divisors(n: int) -> list[int]:
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
    return small + large[::-1]


@lru_cache(maxsize=None)
def dk_single(k: int, n: int) -> int:
    """d_k(n) by the convolution d_k = d_{k-1} * 1.  Reference oracle only."""
    if k < 1:
        raise DomainError(f"fold-count k must be >= 1, got {k}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if k == 1 or n == 1:
        return 1
    return sum(dk_single(k - 1, d) for d in _divisors(n))


# -- streaming -----------------------------------------------------------------

def iter_segments(
    k: int,
    lo: int,
    hi: int,
    fn: Callable[[int, np.ndarray], object],
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> Iterator[object]:
    """Yield fn(seg_lo, d_k values) for consecutive segments of [lo, hi), in order.

    Segments are fixed by ``segment_size`` alone; ``workers`` only changes how
    many are in flight, so any fold over the yielded results is deterministic.
    """
    _check_k(k)
    if lo < 1:
        raise PreconditionError("streaming starts at n >= 1")
    if hi <= lo:
        return
    if segment_size < 1:
        raise PreconditionError("segment_size must be positive")
    primes = primes_upto(math.isqrt(hi - 1))
    bounds = [(a, min(a + segment_size, hi)) for a in range(lo, hi, segment_size)]

    def job(ab):
        a, b = ab
        out = np.empty(b - a, dtype=np.int64)
        _segment_dk(a, b, k, primes, out)
        return fn(a, out)

    if workers <= 1:
        for ab in bounds:
            yield job(ab)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i in range(0, len(bounds), workers):
            yield from pool.map(job, bounds[i : i + workers])


def _segment_total(dk: np.ndarray) -> int:
    if dk.size and int(dk.max()) * dk.size >= (1 << 62):
        return sum(int(v) for v in dk)
    return int(dk.sum())


def stream_prefix(
    k: int,
    lo: int,
    hi: int,
    checkpoints: Sequence[float],
    prefix_at_lo: int = 0,
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> list[PrefixCheckpoint]:
    """Prefix sums sum_{n <= floor(x)} d_k(n) at ascending checkpoints x.

    ``prefix_at_lo`` is the caller-supplied sum over n < lo (0 when lo = 1).
    One pass over [lo, floor(max x) + 1); memory is bounded by the segment size.
    """
    xs = [float(x) for x in checkpoints]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise PreconditionError("checkpoints must be sorted ascending")
    if not xs:
        return []
    if xs[0] < lo or xs[-1] > hi:
        raise PreconditionError(f"checkpoints must lie in [{lo}, {hi}]")
    floors = np.floor(np.asarray(xs)).astype(np.int64)
    stop = int(floors[-1]) + 1

    def seg(a, dk):
        b = a + dk.size
        i0 = int(np.searchsorted(floors, a, side="left"))
        i1 = int(np.searchsorted(floors, b, side="left"))
        local = None
        if i1 > i0:
            csum = np.cumsum(dk, dtype=np.int64) if dk.max() * dk.size < (1 << 62) else None
            if csum is not None:
                local = [int(csum[f - a]) for f in floors[i0:i1]]
            else:
                acc = np.frompyfunc(lambda u, v: u + v, 2, 1).accumulate(dk.astype(object))
                local = [int(acc[f - a]) for f in floors[i0:i1]]
        return _segment_total(dk), local

    results: list[PrefixCheckpoint] = []
    running = int(prefix_at_lo)
    idx = 0
    for total, local in iter_segments(k, lo, stop, seg, segment_size, workers):
        if local:
            for v in local:
                results.append(PrefixCheckpoint(xs[idx], running + v))
                idx += 1
        running += total
    return results


# -- weighted sums of d_k(n)^2 -------------------------------------------------

@dataclass(frozen=True)
class PowerWeight:
    """n -> n^(-s)."""

    s: float


@dataclass(frozen=True)
class Sin2Weight:
    """n -> n^(-1-1/k) sin^2(pi n^(1/k) / L)."""

    L: float


Weight = Union[PowerWeight, Sin2Weight]


def weighted_sums_dk2(
    k: int,
    N: int,
    weights: Sequence[Weight],
    segment_size: int = DEFAULT_SEGMENT,
    workers: int = 1,
) -> list[float]:
    """sum_{n<=N} d_k(n)^2 w(n) for several weights in one sieve pass."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    for w in weights:
        if isinstance(w, PowerWeight) and w.s <= 1:
            warnings.warn(
                f"power weight s={w.s} <= 1: the series diverges as N grows; "
                "returning the finite partial sum",
                RuntimeWarning,
                stacklevel=2,
            )
        elif not isinstance(w, (PowerWeight, Sin2Weight)):
            raise PreconditionError(f"unknown weight spec {w!r}")

    def seg(a, dk):
        parts = []
        for w in weights:
            if isinstance(w, PowerWeight):
                parts.append(_sum_sq_power(a, dk, float(w.s)))
            else:
                parts.append(_sum_sq_sin2(a, dk, k, float(w.L)))
        return parts

    partials: list[list[float]] = [[] for _ in weights]
    for parts in iter_segments(k, 1, N + 1, seg, segment_size, workers):
        for j, (s, c) in enumerate(parts):
            partials[j].append(s)
            partials[j].append(c)
    return [math.fsum(p) for p in partials]


def weighted_sum_dk2(k: int, N: int, weight: Weight, **kw) -> float:
    """sum_{n<=N} d_k(n)^2 w(n) with compensated summation."""
    return weighted_sums_dk2(k, N, [weight], **kw)[0]


def summatory_dk2(k: int, N: int, segment_size: int = DEFAULT_SEGMENT, workers: int = 1) -> int:
    """Exact sum_{n<=N} d_k(n)^2 as a Python int."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")

    def seg(a, dk):
        if dk.size and int(dk.max()) ** 2 * dk.size >= (1 << 62):
            return sum(int(v) * int(v) for v in dk)
        return int(np.dot(dk, dk))

    return sum(iter_segments(k, 1, N + 1, seg, segment_size, workers))


def prefix_at(k: int, xs: Sequence[float], **kw) -> list[int]:
    """Convenience: prefix sums at ascending xs >= 1 from a fresh pass."""
    xs = list(xs)
    if not xs:
        return []
    pts = stream_prefix(k, 1, math.floor(xs[-1]) + 1, xs, **kw)
    return [p.prefix for p in pts]


def locate(checkpoints: Sequence[PrefixCheckpoint], x: float) -> int:
    """Prefix value at x from a sorted checkpoint list containing x."""
    keys = [c.x for c in checkpoints]
    i = bisect_right(keys, x) - 1
    if i < 0 or keys[i] != x:
        raise KeyError(x)
    return checkpoints[i].prefix
