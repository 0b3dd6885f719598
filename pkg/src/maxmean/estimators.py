"""Maximum-mean estimators.

Every estimator maps per-arm summaries (and, for the double estimator, the raw
samples) to a single estimate of the largest arm mean. Arms are indexed from 0;
every argmax breaks ties toward the lowest index, where values within
``TIE_RTOL`` (relative) of the maximum count as tied so that round-off in the
summaries cannot reorder exact ties.

Confidence widths assume 1-sub-Gaussian rewards and use the natural log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .arm_stats import ArmSummary, from_samples


TIE_RTOL = 1e-10


class DegenerateWeight(ValueError):
    """A practical-HAVER weight would divide by zero (epsilon = 0, zero variance)."""


class EstimatorKind(str, Enum):
    LEM = "lem"
    AE = "ae"
    MLCB = "mlcb"
    HAVER = "haver"
    HAVER_PRACTICAL = "haver_practical"
    DE = "de"
    WE = "we"
    ORACLE = "oracle"


@dataclass(frozen=True)
class EstimatorParams:
    epsilon: float = 0.01
    we_draws: int = 10_000
    de_split: str = "alternating"  # or "seeded-random"
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.we_draws < 1:
            raise ValueError("we_draws must be positive")
        if self.de_split not in ("alternating", "seeded-random"):
            raise ValueError(f"unknown de_split {self.de_split!r}")


@dataclass(frozen=True)
class EstimatorInput:
    """Per-arm counts, means and m2 as parallel arrays, plus optional raw samples."""

    counts: np.ndarray
    means: np.ndarray
    m2: np.ndarray
    raw: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        means = np.asarray(self.means, dtype=float)
        m2 = np.asarray(self.m2, dtype=float)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("estimator input needs at least one arm")
        if means.shape != counts.shape or m2.shape != counts.shape:
            raise ValueError("counts, means and m2 must have equal length")
        if counts.min() < 1:
            raise ValueError("every arm needs at least one sample")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "m2", m2)
        if self.raw is not None:
            raw = tuple(np.asarray(r, dtype=float) for r in self.raw)
            if len(raw) != counts.size:
                raise ValueError("raw must hold one sample list per arm")
            for i, r in enumerate(raw):
                s = from_samples(r)
                if s.count != counts[i] or not math.isclose(
                    s.mean, means[i], rel_tol=1e-9, abs_tol=1e-12
                ):
                    raise ValueError(f"raw samples of arm {i} disagree with its summary")
            object.__setattr__(self, "raw", raw)

    @classmethod
    def from_summaries(cls, arms: Sequence[ArmSummary], raw=None) -> "EstimatorInput":
        return cls(
            [a.count for a in arms], [a.mean for a in arms], [a.m2 for a in arms], raw
        )

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]]) -> "EstimatorInput":
        arrays = [np.asarray(s, dtype=float) for s in samples]
        return cls.from_summaries([from_samples(a) for a in arrays], raw=arrays)

    @property
    def K(self) -> int:
        return int(self.counts.size)

    @property
    def arms(self) -> list[ArmSummary]:
        return [
            ArmSummary(int(n), float(m), float(q))
            for n, m, q in zip(self.counts, self.means, self.m2)
        ]

    def variances(self) -> np.ndarray:
        """Unbiased per-arm variances; arms with fewer than two samples get 0."""
        n = self.counts
        return np.where(n >= 2, self.m2 / np.maximum(n - 1, 1), 0.0)


@dataclass(frozen=True)
class WidthTable:
    widths: np.ndarray
    scale_T_or_S: float


class HaverComponents(NamedTuple):
    pivot: int
    widths: WidthTable
    candidates: np.ndarray  # sorted arm indices


def argmax_first(values: np.ndarray) -> int:
    top = values.max()
    return int(np.argmax(values >= top - TIE_RTOL * max(1.0, abs(top))))


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    # Anchoring at the max keeps equal values exact and the result inside [min, max].
    ref = values.max()
    return float(ref + np.dot(weights, values - ref) / weights.sum())


def lem(inp: EstimatorInput) -> float:
    return float(inp.means.max())


def avg_estimator(inp: EstimatorInput) -> float:
    """Grand mean of all samples: count-weighted average of the arm means."""
    return _weighted_mean(inp.means, inp.counts.astype(float))


def mlcb_width(N_i, K, T):
    """sqrt((16/N_i) * log((K*T/N_i)^2)); vectorizes over N_i."""
    return np.sqrt(16.0 / N_i * 2.0 * np.log(K * T / N_i))


def mlcb_widths(inp: EstimatorInput) -> WidthTable:
    n = inp.counts.astype(float)
    T = float(n.sum())
    return WidthTable(mlcb_width(n, inp.K, T), T)


def mlcb(inp: EstimatorInput) -> float:
    widths = mlcb_widths(inp).widths
    return float(inp.means[argmax_first(inp.means - widths)])


def haver_width(N_i, K, S):
    """sqrt((18/N_i) * log((K*S/N_i)^4)); vectorizes over N_i."""
    return np.sqrt(18.0 / N_i * 4.0 * np.log(K * S / N_i))


def haver_widths(inp: EstimatorInput) -> WidthTable:
    n = inp.counts.astype(float)
    S = float(n.max() * n.sum())
    return WidthTable(haver_width(n, inp.K, S), S)


def haver_components(inp: EstimatorInput) -> HaverComponents:
    # inputs are immutable, so both HAVER variants share one computation
    cached = inp.__dict__.get("_haver")
    if cached is not None:
        return cached
    table = haver_widths(inp)
    g = table.widths
    means = inp.means
    pivot = argmax_first(means - g)
    mask = (means >= means[pivot] - g[pivot]) & (g <= 1.5 * g[pivot])
    cached = HaverComponents(pivot, table, np.flatnonzero(mask))
    object.__setattr__(inp, "_haver", cached)
    return cached


def haver_theoretical(inp: EstimatorInput) -> float:
    _, _, cand = haver_components(inp)
    return _weighted_mean(inp.means[cand], inp.counts[cand].astype(float))


def haver_practical(inp: EstimatorInput, params: EstimatorParams = EstimatorParams()) -> float:
    _, _, cand = haver_components(inp)
    var = inp.variances()[cand] + params.epsilon
    if np.any(var <= 0):
        raise DegenerateWeight("degenerate weight: zero variance with epsilon = 0")
    return _weighted_mean(inp.means[cand], inp.counts[cand] / var)


def _split(x: np.ndarray, params: EstimatorParams, rng) -> tuple[np.ndarray, np.ndarray]:
    if params.de_split == "alternating":
        return x[0::2], x[1::2]
    perm = rng.permutation(x.size)
    half = (x.size + 1) // 2
    return x[perm[:half]], x[perm[half:]]


def double_estimator(inp: EstimatorInput, params: EstimatorParams = EstimatorParams()) -> float:
    """Two-fold split: pick the argmax on one fold, read its mean off the other."""
    if inp.raw is None:
        raise ValueError("double estimator requires raw samples")
    if inp.counts.min() < 2:
        raise ValueError("double estimator requires at least 2 samples per arm")
    rng = None
    if params.de_split == "seeded-random":
        if params.rng_seed is None:
            raise ValueError("seeded-random split requires rng_seed")
        rng = np.random.default_rng(params.rng_seed)
    mean_a = np.empty(inp.K)
    mean_b = np.empty(inp.K)
    for i, x in enumerate(inp.raw):
        a, b = _split(x, params, rng)
        mean_a[i] = a.mean()
        mean_b[i] = b.mean()
    j_a = argmax_first(mean_a)
    j_b = argmax_first(mean_b)
    return 0.5 * (float(mean_b[j_a]) + float(mean_a[j_b]))


def weighted_estimator(inp: EstimatorInput, params: EstimatorParams = EstimatorParams()) -> float:
    """Means weighted by the Monte-Carlo probability of each arm being the max.

    Each arm's mean is modelled as N(mean_i, var_i / N_i); arms with fewer
    than two samples use ``params.epsilon`` as their variance.
    """
    if inp.K == 1:
        return float(inp.means[0])
    var = np.where(inp.counts >= 2, inp.variances(), params.epsilon)
    sd = np.sqrt(var / inp.counts)
    rng = np.random.default_rng(0 if params.rng_seed is None else params.rng_seed)
    z = rng.standard_normal((params.we_draws, inp.K))
    centered = inp.means - inp.means.max()
    winners = np.argmax(centered + sd * z, axis=1)
    w = np.bincount(winners, minlength=inp.K).astype(float)
    return _weighted_mean(inp.means, w)


def oracle(inp: EstimatorInput, best_index: int) -> float:
    if not 0 <= best_index < inp.K:
        raise IndexError(f"best_index {best_index} out of range for K={inp.K}")
    return float(inp.means[best_index])


_TABLE: dict[str, Callable] = {
    EstimatorKind.LEM.value: lambda inp, p: lem(inp),
    EstimatorKind.AE.value: lambda inp, p: avg_estimator(inp),
    EstimatorKind.MLCB.value: lambda inp, p: mlcb(inp),
    EstimatorKind.HAVER.value: lambda inp, p: haver_theoretical(inp),
    EstimatorKind.HAVER_PRACTICAL.value: haver_practical,
    EstimatorKind.DE.value: double_estimator,
    EstimatorKind.WE.value: weighted_estimator,
}

ESTIMATOR_NAMES = tuple(k.value for k in EstimatorKind)


def needs_raw(name: str) -> bool:
    return EstimatorKind(name) is EstimatorKind.DE


def uses_seed(name: str, params: EstimatorParams) -> bool:
    kind = EstimatorKind(name)
    return kind is EstimatorKind.WE or (
        kind is EstimatorKind.DE and params.de_split == "seeded-random"
    )


def estimate(
    name: str,
    inp: EstimatorInput,
    params: EstimatorParams = EstimatorParams(),
    best_index: Optional[int] = None,
) -> float:
    """Dispatch by estimator name. ``oracle`` needs ``best_index``."""
    kind = EstimatorKind(name)
    if kind is EstimatorKind.ORACLE:
        if best_index is None:
            raise ValueError("oracle estimator needs best_index")
        return oracle(inp, best_index)
    return _TABLE[kind.value](inp, params)
