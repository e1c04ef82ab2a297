"""Sampling plans over [X, 2X] and the stratified mean estimator."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import PreconditionError

MODES = ("stratified", "grid")
INTERVAL_MODES = ("x-dependent", "fixed")


@dataclass(frozen=True)
class SamplingPlan:
    """M abscissae in [X, 2X]: one uniform draw per equal-width stratum, or stratum midpoints."""

    X: float
    samples: int
    seed: int = 0
    mode: str = "stratified"
    interval_mode: str = "x-dependent"

    def __post_init__(self):
        if self.samples < 1:
            raise PreconditionError("a plan needs at least one sample")
        if self.X < 1:
            raise PreconditionError("X must be >= 1")
        if self.mode not in MODES:
            raise PreconditionError(f"mode must be one of {MODES}")
        if self.interval_mode not in INTERVAL_MODES:
            raise PreconditionError(f"interval_mode must be one of {INTERVAL_MODES}")

    def points(self) -> np.ndarray:
        M = self.samples
        offsets = np.arange(M, dtype=float)
        if self.mode == "grid":
            offsets += 0.5
        else:
            rng = np.random.default_rng(self.seed)
            offsets += rng.random(M)
        return self.X + self.X * offsets / M

    def as_dict(self) -> dict:
        return asdict(self)


def stratified_mean(values) -> tuple[float, float]:
    """Mean of one-per-stratum values and its standard error.

    Adjacent strata are collapsed in pairs; (y_a - y_b)^2 estimates the summed
    within-stratum variance of the pair.  A trailing odd stratum borrows its
    neighbour's pair.  One value gives a NaN standard error.
    """
    y = np.asarray(values, dtype=float)
    M = y.size
    mean = math.fsum(y) / M
    if M < 2:
        return mean, float("nan")
    d = y[1 : M - M % 2 : 2] - y[0 : M - M % 2 : 2]
    ss = math.fsum(d * d)
    if M % 2:
        ss += 0.5 * (y[-1] - y[-2]) ** 2
    return mean, math.sqrt(ss) / M
