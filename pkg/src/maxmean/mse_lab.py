"""Monte-Carlo MSE experiments and the equal-count good-set diagnostics."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .estimators import EstimatorInput, EstimatorParams, estimate, needs_raw, uses_seed
from .instances import InstanceSpec, sample, sample_summaries
from .seeding import derive_seed, make_rng

CSV_HEADER = ("experiment", "estimator", "K", "N_axis", "trials", "seed",
              "mse", "bias", "variance", "stderr_mse")


class TrialError(RuntimeError):
    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial}: {cause}")
        self.trial = trial


@dataclass(frozen=True)
class MseReport:
    trials: int
    mse: float
    bias: float
    variance: float
    stderr_mse: float

    @classmethod
    def from_estimates(cls, estimates: np.ndarray, target: float) -> "MseReport":
        est = np.asarray(estimates, dtype=float)
        sq = (est - target) ** 2
        mse = float(sq.mean())
        bias = float(est.mean() - target)
        return cls(
            trials=int(est.size),
            mse=mse,
            bias=bias,
            variance=max(0.0, mse - bias * bias),
            stderr_mse=float(sq.std(ddof=1) / math.sqrt(est.size)),
        )


def fmt(x: float) -> str:
    """Round-trip float formatting shared by every CSV writer."""
    return format(float(x), ".17g")


def _trial_input(spec: InstanceSpec, rng: np.random.Generator, raw: bool) -> EstimatorInput:
    if raw:
        return EstimatorInput.from_samples(sample(spec, rng))
    return sample_summaries(spec, rng)


def _estimates(spec, estimator, params, seed, trials, raw) -> np.ndarray:
    out = np.empty(len(trials))
    best = spec.best_index
    for j, t in enumerate(trials):
        rng = make_rng(seed, t)
        inp = _trial_input(spec, rng, raw)
        p = params
        if params.rng_seed is None and uses_seed(estimator, params):
            p = replace(params, rng_seed=derive_seed(seed, t, 1))
        try:
            out[j] = estimate(estimator, inp, p, best_index=best)
        except Exception as e:
            raise TrialError(t, e) from e
    return out


def run_trials(
    spec: InstanceSpec,
    estimator: str,
    trials: int,
    seed: int,
    params: EstimatorParams = EstimatorParams(),
    jobs: int = 1,
    raw: Optional[bool] = None,
) -> MseReport:
    """Estimate MSE, bias and variance of ``estimator`` on ``spec``.

    Trial ``t`` draws its data from ``make_rng(seed, t)``, so the report does
    not depend on ``jobs``. Unless ``raw`` is forced, raw samples are drawn
    only for estimators that need them; otherwise per-arm summaries are drawn
    from their exact sampling law.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if raw is None:
        raw = needs_raw(estimator)
    idx = list(range(trials))
    if jobs <= 1:
        est = _estimates(spec, estimator, params, seed, idx, raw)
    else:
        chunks = [c.tolist() for c in np.array_split(np.arange(trials), jobs) if c.size]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = ex.map(
                _estimates, *zip(*[(spec, estimator, params, seed, c, raw) for c in chunks])
            )
            est = np.concatenate(list(parts))
    return MseReport.from_estimates(est, spec.best_mean)


@dataclass(frozen=True)
class SweepRow:
    experiment: str
    estimator: str
    K: int
    N_axis: int
    seed: int
    report: MseReport


def sweep(
    family: Callable[..., InstanceSpec],
    estimators: Sequence[str],
    axis: str,
    values: Sequence[int],
    trials: int,
    seed: int,
    *,
    experiment: str = "",
    params: EstimatorParams = EstimatorParams(),
    jobs: int = 1,
) -> list[SweepRow]:
    """Run every (axis value, estimator) cell.

    ``family`` is called as ``family(N=v)`` for ``axis="samples_per_arm"`` and
    ``family(K=v)`` for ``axis="num_arms"``. Cell (i, j) uses seed
    ``derive_seed(seed, i, j)``. Rows are ordered by axis value, then estimator.
    """
    if not values:
        raise ValueError("sweep axis must be non-empty")
    key = {"samples_per_arm": "N", "num_arms": "K"}.get(axis)
    if key is None:
        raise ValueError(f"unknown sweep axis {axis!r}")
    rows = []
    for i, v in enumerate(values):
        spec = family(**{key: v})
        for j, name in enumerate(estimators):
            s = derive_seed(seed, i, j)
            rep = run_trials(spec, name, trials, s, params=params, jobs=jobs)
            rows.append(SweepRow(experiment, name, spec.K, max(spec.counts), s, rep))
    return rows


def export_csv(rows: Sequence[SweepRow], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in rows:
                rep = r.report
                w.writerow([r.experiment, r.estimator, r.K, r.N_axis, rep.trials, r.seed,
                            fmt(rep.mse), fmt(rep.bias), fmt(rep.variance),
                            fmt(rep.stderr_mse)])
    except OSError as e:
        raise OSError(f"cannot write {os.fspath(path)}: {e.strerror or e}") from e


@dataclass(frozen=True)
class GoodSets:
    gamma: float
    b_star: tuple
    b_plus: tuple


def _equal_count(N) -> int:
    if np.ndim(N) == 0:
        return int(N)
    ns = set(int(n) for n in N)
    if len(ns) != 1:
        raise ValueError("equal-count corollary only: counts differ")
    return ns.pop()


def equal_count_gamma(N: int, K: int) -> float:
    return math.sqrt(18.0 / N * 4.0 * math.log(K * K * N))


def good_sets(means: Sequence[float], N, K: Optional[int] = None) -> GoodSets:
    """Gap-threshold sets at equal per-arm count N (0-based arm indices).

    b_star holds arms with gap <= gamma/6, b_plus those with gap <= 8*gamma/3.
    """
    m = np.asarray(means, dtype=float)
    K = m.size if K is None else K
    if K != m.size:
        raise ValueError("K must equal len(means)")
    N = _equal_count(N)
    gamma = equal_count_gamma(N, K)
    gaps = m.max() - m
    return GoodSets(
        gamma,
        tuple(np.flatnonzero(gaps <= gamma / 6).tolist()),
        tuple(np.flatnonzero(gaps <= 8 * gamma / 3).tolist()),
    )


class Corollary7Terms(NamedTuple):
    head_bias: float
    log_ratio: float
    good_variance: float
    all_variance: float


def corollary7_bound(means: Sequence[float], N, K: Optional[int] = None) -> Corollary7Terms:
    """The four order terms of the equal-count HAVER bound, log factors and
    constants dropped:

        (mean gap over the |B+| smallest gaps, scaled by 1/|B*|)^2 ^ 1/N
        (log(|B+|/|B*|))^2 / N ^ 1/N
        1 / (|B*| N)
        1 / (K N)
    """
    m = np.asarray(means, dtype=float)
    K = m.size if K is None else K
    N = _equal_count(N)
    gs = good_sets(m, N, K)
    n_star, n_plus = len(gs.b_star), len(gs.b_plus)
    gaps = np.sort(m.max() - m)
    t1 = min((gaps[:n_plus].sum() / n_star) ** 2, 1.0 / N)
    t2 = min(math.log(n_plus / n_star) ** 2 / N, 1.0 / N)
    return Corollary7Terms(t1, t2, 1.0 / (n_star * N), 1.0 / (K * N))


def kstar_threshold(delta: float, K: int) -> float:
    """Sample size above which the K*-best acceleration result applies."""
    d2 = delta * delta
    return 256.0 / d2 * math.log(256.0 * K * K / (d2 * math.e))
