import numpy as np
import pytest

from maxmean.estimators import EstimatorInput


def random_summary_input(rng: np.random.Generator, max_k=20, max_n=1000) -> EstimatorInput:
    """Gaussian or Bernoulli arms, summaries drawn from their exact sampling law."""
    K = int(rng.integers(1, max_k + 1))
    n = rng.integers(1, max_n + 1, size=K)
    if rng.random() < 0.5:
        mu = rng.uniform(-2, 2, size=K)
        means = mu + rng.standard_normal(K) / np.sqrt(n)
        m2 = np.where(n >= 2, rng.chisquare(np.maximum(n - 1, 1)), 0.0)
    else:
        p = rng.uniform(0, 1, size=K)
        k = rng.binomial(n, p).astype(float)
        means, m2 = k / n, k * (n - k) / n
    return EstimatorInput(n, means, m2)


def random_raw_input(rng: np.random.Generator, max_k=8, max_n=40, even=False) -> EstimatorInput:
    """Raw samples (min 2 per arm) so every estimator, DE included, applies."""
    K = int(rng.integers(1, max_k + 1))
    raw = []
    for _ in range(K):
        n = int(rng.integers(1, max_n // 2 + 1)) * 2 if even else int(rng.integers(2, max_n + 1))
        if rng.random() < 0.5:
            raw.append(rng.uniform(-3, 3) + rng.standard_normal(n) * rng.uniform(0.1, 3))
        else:
            raw.append((rng.random(n) < rng.uniform()).astype(float))
    return EstimatorInput.from_samples(raw)


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion_log(request):
    """Collects one pass/fail line per acceptance criterion for the summary."""
    return request.config.stash.setdefault(_CRITERIA, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
