import math

import numpy as np
import pytest

from maxmean.instances import InstanceSpec, kstar_best
from maxmean.mse_lab import (
    CSV_HEADER,
    MseReport,
    SweepRow,
    TrialError,
    corollary7_bound,
    export_csv,
    good_sets,
    kstar_threshold,
    run_trials,
    sweep,
)


def test_report_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        est = rng.normal(rng.uniform(-1, 1), rng.uniform(0.01, 2), size=50)
        r = MseReport.from_estimates(est, 0.3)
        assert abs(r.mse - (r.bias ** 2 + r.variance)) <= 1e-9 * max(1.0, r.mse)
        sq = (est - 0.3) ** 2
        assert r.stderr_mse == pytest.approx(sq.std(ddof=1) / math.sqrt(50))


def test_degenerate_bernoulli_zero_mse():
    spec = InstanceSpec((1.0, 1.0, 1.0), (5, 5, 5), "bernoulli")
    for name in ["lem", "ae", "haver", "haver_practical", "mlcb", "we", "de", "oracle"]:
        assert run_trials(spec, name, 20, seed=1).mse == 0.0
    spec = InstanceSpec((0.0, 0.0), (4, 6), "bernoulli")
    assert run_trials(spec, "lem", 20, seed=1).mse == 0.0


def test_oracle_rate_quick():
    r = run_trials(InstanceSpec((0.0,), (100,)), "oracle", 20_000, seed=3)
    assert abs(r.mse - 0.01) <= 3 * r.stderr_mse


def test_determinism_and_jobs_invariance():
    spec = InstanceSpec((0.0, -0.1, -0.2), (20, 20, 20))
    a = run_trials(spec, "haver", 300, seed=42)
    b = run_trials(spec, "haver", 300, seed=42)
    c = run_trials(spec, "haver", 300, seed=42, jobs=2)
    assert a == b == c


def test_raw_and_summary_paths_agree_in_distribution():
    spec = InstanceSpec((0.0, 0.0, -0.2), (30, 30, 30))
    a = run_trials(spec, "lem", 4000, seed=1, raw=True)
    b = run_trials(spec, "lem", 4000, seed=2, raw=False)
    assert abs(a.mse - b.mse) < 4 * math.hypot(a.stderr_mse, b.stderr_mse)


def test_trial_errors_carry_index():
    spec = InstanceSpec((0.0, 0.0), (1, 3))
    with pytest.raises(TrialError, match="trial 0"):
        run_trials(spec, "de", 5, seed=0)
    with pytest.raises(ValueError):
        run_trials(spec, "lem", 1, seed=0)


def test_sweep_shape_and_single_value():
    fam = lambda N: InstanceSpec((0.0, -0.5), (N, N))  # noqa: E731
    rows = sweep(fam, ["lem", "oracle", "ae"], "samples_per_arm", [10, 20], 50, seed=5)
    assert len(rows) == 6
    assert [(r.N_axis, r.estimator) for r in rows][:3] == [(10, "lem"), (10, "oracle"), (10, "ae")]
    one = sweep(fam, ["lem"], "samples_per_arm", [10], 50, seed=5)[0]
    assert one.report == run_trials(fam(10), "lem", 50, one.seed)
    with pytest.raises(ValueError):
        sweep(fam, ["lem"], "samples_per_arm", [], 50, seed=5)


def test_sweep_num_arms_axis():
    fam = lambda K: InstanceSpec(tuple(kstar_best(K, 1, 0.0, -1.0)), (10,) * K)  # noqa: E731
    rows = sweep(fam, ["lem"], "num_arms", [2, 3, 4], 20, seed=1)
    assert [r.K for r in rows] == [2, 3, 4]


def test_oracle_mse_decreases_with_n():
    fam = lambda N: InstanceSpec((0.0, -1.0), (N, N))  # noqa: E731
    lo, hi = sweep(fam, ["oracle"], "samples_per_arm", [100, 1000], 10_000, seed=9)
    assert hi.report.mse < lo.report.mse


def test_good_sets_allbest():
    gs = good_sets([0.3] * 6, 100)
    assert gs.b_star == gs.b_plus == tuple(range(6))


def test_good_sets_separated():
    gs = good_sets([0.0, -50.0, -60.0], 100)
    assert gs.b_star == gs.b_plus == (0,)


def test_good_sets_kstar_past_threshold():
    K, k_star, delta = 50, 25, 0.5
    N = 40_000
    assert N > kstar_threshold(delta, K)
    gs = good_sets(kstar_best(K, k_star, 0.0, -delta), N)
    # oracle: gamma from the closed form, compared against the gap directly
    gamma = math.sqrt(18 / N * math.log((K * K * N) ** 4))
    assert gs.gamma == pytest.approx(gamma, rel=1e-12)
    assert delta > 8 / 3 * gamma
    assert gs.b_star == gs.b_plus == tuple(range(k_star))


def test_good_sets_unequal_counts():
    with pytest.raises(ValueError, match="equal-count"):
        good_sets([0.0, -1.0], [10, 20])
    assert good_sets([0.0, -1.0], [10, 10]) == good_sets([0.0, -1.0], 10)


def test_good_sets_monotone_in_n():
    rng = np.random.default_rng(4)
    for _ in range(200):
        means = -rng.exponential(rng.uniform(0.01, 2), size=int(rng.integers(1, 30)))
        means[0] = 0.0
        a = good_sets(means, int(rng.integers(1, 1000)))
        b = good_sets(means, int(rng.integers(1000, 100_000)))
        assert set(a.b_star) <= set(a.b_plus) and 0 in a.b_star
        assert set(b.b_star) <= set(a.b_star)
        assert set(b.b_plus) <= set(a.b_plus)


def test_corollary7_terms():
    K, N = 10, 100
    assert corollary7_bound([0.2] * K, N) == (0.0, 0.0, 1 / (K * N), 1 / (K * N))
    assert corollary7_bound([0.0] + [-100.0] * (K - 1), N) == (0.0, 0.0, 1 / N, 1 / (K * N))
    t = corollary7_bound(kstar_best(50, 25, 0.0, -0.5), 40_000)
    assert t == (0.0, 0.0, 1 / (25 * 40_000), 1 / (50 * 40_000))


def test_corollary7_mixed_sets():
    # gamma at N=100, K=3; gaps chosen inside (gamma/6, 8 gamma/3]
    N, K = 100, 3
    gamma = math.sqrt(18 / N * 4 * math.log(K * K * N))
    gaps = [0.0, gamma / 12, gamma]
    t = corollary7_bound([-g for g in gaps], N)
    assert t.head_bias == pytest.approx(min((sum(gaps) / 2) ** 2, 1 / N))
    assert t.log_ratio == pytest.approx(min(math.log(3 / 2) ** 2 / N, 1 / N))
    assert t.good_variance == pytest.approx(1 / (2 * N))


def test_export_csv(tmp_path):
    p = tmp_path / "r.csv"
    export_csv([], p)
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"
    rep = MseReport(10, 0.1, 0.2, 0.3, 0.01)
    rows = [SweepRow("kstar", "lem", 5, 100, 7, rep)]
    export_csv(rows, p)
    lines = p.read_text().split("\n")
    assert len(lines) == 3 and lines[2] == ""
    assert lines[1].startswith("kstar,lem,5,100,10,7,")
    assert float(lines[1].split(",")[6]) == 0.1
    first = p.read_bytes()
    export_csv(rows, p)
    assert p.read_bytes() == first


def test_export_csv_unwritable(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        export_csv([], tmp_path / "missing" / "r.csv")


def test_round_trip_float_format(tmp_path):
    x = 0.1 + 0.2
    rows = [SweepRow("e", "lem", 1, 1, 0, MseReport(2, x, x, x, x))]
    export_csv(rows, tmp_path / "r.csv")
    assert float((tmp_path / "r.csv").read_text().splitlines()[1].split(",")[6]) == x
