"""Problem-instance generators and reward samplers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .estimators import EstimatorInput
from .seeding import make_rng

REWARD_MODELS = ("gaussian_unit", "bernoulli")

RngLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class InstanceSpec:
    means: tuple
    counts: tuple
    reward_model: str = "gaussian_unit"

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        counts = tuple(int(n) for n in self.counts)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "counts", counts)
        if not means:
            raise ValueError("instance needs at least one arm")
        if len(means) != len(counts):
            raise ValueError("means and counts must have equal length")
        if min(counts) < 1:
            raise ValueError("every arm needs a positive sample count")
        if self.reward_model not in REWARD_MODELS:
            raise ValueError(f"unknown reward model {self.reward_model!r}")
        if self.reward_model == "bernoulli" and not all(0.0 <= m <= 1.0 for m in means):
            raise ValueError("bernoulli means must lie in [0, 1]")
        n = np.asarray(counts, dtype=np.int64)
        # cached arrays for the per-trial samplers
        object.__setattr__(self, "_mu", np.asarray(means))
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_sqrt_n", np.sqrt(n))
        object.__setattr__(self, "_dof", np.maximum(n - 1, 1))

    @property
    def K(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.means))

    @property
    def gaps(self) -> np.ndarray:
        m = np.asarray(self.means)
        return m.max() - m


def kstar_best(K: int, k_star: int, mu_top: float, mu_bot: float) -> list[float]:
    if not 1 <= k_star <= K:
        raise ValueError("need 1 <= k_star <= K")
    if mu_top < mu_bot:
        raise ValueError("need mu_top >= mu_bot")
    return [float(mu_top)] * k_star + [float(mu_bot)] * (K - k_star)


def poly_alpha(K: int, alpha: float, mu1: float) -> list[float]:
    """mu_1 = mu1, mu_i = mu1 - (i/K)^alpha for i >= 2 (1-based i)."""
    if K < 1 or alpha < 1:
        raise ValueError("need K >= 1 and alpha >= 1")
    return [float(mu1)] + [mu1 - (i / K) ** alpha for i in range(2, K + 1)]


def uniform_means(K: int, lo: float, hi: float, seed: int) -> list[float]:
    if lo > hi:
        raise ValueError("need lo <= hi")
    draws = make_rng(seed).uniform(lo, hi, size=K)
    return sorted(draws.tolist(), reverse=True)


def allbest_counts(K: int, beta: float) -> list[int]:
    """N_i = floor((K - i + 1)^beta), floored at 1."""
    if K < 1 or beta <= 0:
        raise ValueError("need K >= 1 and beta > 0")
    return [max(1, math.floor((K - i + 1) ** beta)) for i in range(1, K + 1)]


def rescale(means: Sequence[float], lo: float, hi: float) -> list[float]:
    """Affine map sending min(means) to lo and max(means) to hi."""
    m = np.asarray(means, dtype=float)
    span = m.max() - m.min()
    if span == 0:
        return [float(hi)] * len(m)
    return (lo + (m - m.min()) * (hi - lo) / span).tolist()


def _rng(seed: RngLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else make_rng(seed)


def sample(spec: InstanceSpec, seed: RngLike) -> list[np.ndarray]:
    """Raw samples, one array of length N_i per arm."""
    rng = _rng(seed)
    out = []
    for mu, n in zip(spec.means, spec.counts):
        if spec.reward_model == "bernoulli":
            out.append((rng.random(n) < mu).astype(float))
        else:
            out.append(mu + rng.standard_normal(n))
    return out


def sample_summaries(spec: InstanceSpec, seed: RngLike) -> EstimatorInput:
    """Draw the per-arm (mean, m2) directly from their exact sampling laws.

    Gaussian: mean ~ N(mu, 1/N) independent of m2 ~ chi^2(N - 1).
    Bernoulli: successes k ~ Bin(N, p), mean = k/N, m2 = k(N - k)/N.
    Equal in distribution to summarizing ``sample`` but O(K) per draw.
    """
    rng = _rng(seed)
    mu, n = spec._mu, spec._n
    if spec.reward_model == "bernoulli":
        k = rng.binomial(n, mu).astype(float)
        return EstimatorInput(n, k / n, k * (n - k) / n)
    means = mu + rng.standard_normal(n.size) / spec._sqrt_n
    m2 = rng.chisquare(spec._dof)
    m2[n < 2] = 0.0
    return EstimatorInput(n, means, m2)


@dataclass(frozen=True)
class InstanceRecipe:
    """Serializable description of how to build an instance.

    JSON schema: ``{"kind": str, "K": int, "params": {...}, "seed": int | null}``.

    kinds and their params (all take ``N`` per-arm count, default 500, and
    ``reward`` in {"bernoulli", "gaussian_unit"}, default "bernoulli"):
      kstar    k_star (default K//2), mu_top (0.005), mu_bot (0.002)
      poly     alpha (2), mu1 (0); means rescaled into [lo, hi] (0.002, 0.005)
               unless ``rescale`` is false
      uniform  lo (0.002), hi (0.005); needs ``seed``
      allbest  mu (0.005), beta; counts follow allbest_counts when beta given
      explicit means (list), counts (list, optional; else N for every arm)
    """

    kind: str
    K: int
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def build(self) -> InstanceSpec:
        p = dict(self.params)
        K = int(self.K)
        reward = p.get("reward", "bernoulli")
        N = int(p.get("N", 500))
        counts = [N] * K
        if self.kind == "kstar":
            means = kstar_best(
                K, int(p.get("k_star", max(1, K // 2))),
                p.get("mu_top", 0.005), p.get("mu_bot", 0.002),
            )
        elif self.kind == "poly":
            means = poly_alpha(K, p.get("alpha", 2.0), p.get("mu1", 0.0))
            if p.get("rescale", True) and K > 1:
                means = rescale(means, p.get("lo", 0.002), p.get("hi", 0.005))
        elif self.kind == "uniform":
            if self.seed is None:
                raise ValueError("uniform instance requires a seed")
            means = uniform_means(K, p.get("lo", 0.002), p.get("hi", 0.005), self.seed)
        elif self.kind == "allbest":
            means = [float(p.get("mu", 0.005))] * K
            if "beta" in p:
                counts = allbest_counts(K, p["beta"])
        elif self.kind == "explicit":
            means = list(p["means"])
            counts = list(p.get("counts", [N] * len(means)))
            if len(means) != K:
                raise ValueError("explicit means must have length K")
        else:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        return InstanceSpec(tuple(means), tuple(counts), reward)

    def with_params(self, K: Optional[int] = None, **params: Any) -> "InstanceRecipe":
        return InstanceRecipe(
            self.kind, self.K if K is None else K, {**self.params, **params}, self.seed
        )

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "K": self.K, "params": self.params, "seed": self.seed},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "InstanceRecipe":
        d = json.loads(text)
        missing = {"kind", "K"} - d.keys()
        if missing:
            raise ValueError(f"instance JSON missing keys {sorted(missing)}")
        return cls(d["kind"], int(d["K"]), dict(d.get("params", {})), d.get("seed"))
