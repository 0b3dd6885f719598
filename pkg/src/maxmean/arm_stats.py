"""Streaming per-arm sample summaries (count, mean, sum of squared deviations)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class VarianceUndefined(ValueError):
    """Raised when an unbiased variance is requested from fewer than two samples."""


@dataclass(frozen=True)
class ArmSummary:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0  # sum of squared deviations from the current mean

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if self.m2 < 0:
            raise ValueError("m2 must be nonnegative")
        if self.count == 0 and (self.mean != 0.0 or self.m2 != 0.0):
            raise ValueError("empty summary must have mean = m2 = 0")


def welford_step(count: int, mean: float, m2: float, x: float) -> tuple[int, float, float]:
    """One step of Welford's recurrence on raw fields."""
    count += 1
    delta = x - mean
    mean += delta / count
    m2 += delta * (x - mean)
    return count, mean, m2


def update(summary: ArmSummary, x: float) -> ArmSummary:
    return ArmSummary(*welford_step(summary.count, summary.mean, summary.m2, float(x)))


def merge(a: ArmSummary, b: ArmSummary) -> ArmSummary:
    """Combine two summaries of disjoint sample sets (Chan et al. pairwise update)."""
    if a.count == 0:
        return b
    if b.count == 0:
        return a
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + delta * delta * (a.count * b.count / n)
    return ArmSummary(n, mean, m2)


def variance_unbiased(summary: ArmSummary) -> float:
    if summary.count < 2:
        raise VarianceUndefined(f"variance undefined for count={summary.count}")
    return summary.m2 / (summary.count - 1)


def from_samples(xs: Iterable[float]) -> ArmSummary:
    count, mean, m2 = 0, 0.0, 0.0
    for x in xs:
        count, mean, m2 = welford_step(count, mean, m2, float(x))
    return ArmSummary(count, mean, m2)
