"""Command-line front end: ``maxmean {mse,qlearn,mcts,bounds}``.

Every flag has a JSON config twin (``--config file.json``, same key with
dashes as underscores); flags override file values, file values override
defaults. ``--dump-config`` prints the resolved config and exits.

Exit codes: 0 success, 1 runtime error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import mcts, mse_lab, qlearning
from .estimators import ESTIMATOR_NAMES, EstimatorParams
from .instances import REWARD_MODELS, InstanceRecipe
from .seeding import derive_seed

COMMANDS = ("mse", "qlearn", "mcts", "bounds")
INSTANCE_KINDS = ("kstar", "poly", "uniform", "allbest")


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"config error: {key}: {msg}")
        self.key = key


@dataclass
class RunConfig:
    command: str = "mse"
    estimators: list = field(default_factory=lambda: ["lem", "haver"])
    trials: int = 1000
    seed: Optional[int] = None
    out: Optional[str] = None
    jobs: int = 1
    # estimator knobs
    epsilon: float = 0.01
    we_draws: int = 10_000
    de_split: str = "alternating"
    # bandit instances (mse, bounds)
    instance: str = "kstar"
    K: list = field(default_factory=lambda: [50])
    N: list = field(default_factory=lambda: [500])
    kstar: Optional[int] = None
    alpha: float = 2.0
    beta: Optional[float] = None
    mu_top: float = 0.005
    mu_bot: float = 0.002
    lo: float = 0.002
    hi: float = 0.005
    reward: str = "bernoulli"
    instance_seed: Optional[int] = None
    # grid world (qlearn)
    M: int = 1
    steps: int = 10_000
    width: int = 3
    height: int = 3
    lr: str = "0.1"
    eps_greedy: float = 0.1
    eta: float = 0.95
    # frozen lake (mcts)
    env: str = "4x4"
    simulations: list = field(default_factory=lambda: [128])
    ucb_c: float = 10.0 * 2 ** 0.5

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown key")
        return cls(**d)

    def estimator_params(self) -> EstimatorParams:
        return EstimatorParams(epsilon=self.epsilon, we_draws=self.we_draws,
                               de_split=self.de_split)

    def recipe(self, K: int, N: int) -> InstanceRecipe:
        params = {"N": N, "reward": self.reward}
        if self.instance == "kstar":
            params.update(k_star=self.kstar if self.kstar is not None else max(1, K // 2),
                          mu_top=self.mu_top, mu_bot=self.mu_bot)
        elif self.instance == "poly":
            params.update(alpha=self.alpha, lo=self.lo, hi=self.hi)
        elif self.instance == "uniform":
            params.update(lo=self.lo, hi=self.hi)
        elif self.instance == "allbest":
            params.update(mu=self.mu_top)
            if self.beta is not None:
                params["beta"] = self.beta
        seed = self.instance_seed if self.instance_seed is not None else self.seed
        return InstanceRecipe(self.instance, K, params, seed)


def _as_list(value, cast, key):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return [cast(v.strip() if isinstance(v, str) else v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {value!r}") from None


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}")
    cfg.estimators = _as_list(cfg.estimators, str, "estimators")
    for name in cfg.estimators:
        if name not in ESTIMATOR_NAMES:
            raise ConfigError("estimators", f"unknown estimator {name!r}")
    if cfg.command == "mcts" and "de" in cfg.estimators:
        raise ConfigError("estimators", "'de' needs raw samples, which search nodes do not keep")
    if not cfg.estimators and cfg.command != "bounds":
        raise ConfigError("estimators", "empty estimator list")
    cfg.K = _as_list(cfg.K, int, "K")
    cfg.N = _as_list(cfg.N, int, "N")
    cfg.simulations = _as_list(cfg.simulations, int, "simulations")
    if cfg.seed is None and cfg.command != "bounds":
        raise ConfigError("seed", "a seed is required")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ConfigError("trials", "must be a positive integer")
    if cfg.command == "mse" and cfg.trials < 2:
        raise ConfigError("trials", "mse needs at least 2 trials")
    if cfg.instance not in INSTANCE_KINDS:
        raise ConfigError("instance", f"unknown instance {cfg.instance!r}")
    if cfg.reward not in REWARD_MODELS:
        raise ConfigError("reward", f"unknown reward model {cfg.reward!r}")
    if cfg.de_split not in ("alternating", "seeded-random"):
        raise ConfigError("de_split", f"unknown split {cfg.de_split!r}")
    if cfg.env not in mcts.MAPS:
        raise ConfigError("env", f"unknown lake {cfg.env!r}")
    if len(cfg.K) > 1 and len(cfg.N) > 1:
        raise ConfigError("K", "sweep either K or N, not both")
    if not cfg.K or not cfg.N or min(cfg.K + cfg.N) < 1:
        raise ConfigError("K" if not cfg.K or min(cfg.K) < 1 else "N", "must be positive")
    if cfg.jobs < 1:
        raise ConfigError("jobs", "must be >= 1")
    if cfg.lr != "poly":
        try:
            float(cfg.lr)
        except ValueError:
            raise ConfigError("lr", f"expected a number or 'poly', got {cfg.lr!r}") from None
    if cfg.out is not None:
        parent = Path(cfg.out).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise ConfigError("out", f"cannot write to {cfg.out!r}")
    if cfg.command in ("mse", "qlearn", "mcts") and cfg.out is None:
        raise ConfigError("out", "an output path is required")
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON config file")
    p.add_argument("--dump-config", action="store_true", default=S)
    p.add_argument("--estimators", default=S, help="comma-separated, e.g. lem,haver")
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--jobs", type=int, default=S, help="default: $MAXMEAN_JOBS or 1")
    p.add_argument("--epsilon", type=float, default=S)
    p.add_argument("--we-draws", dest="we_draws", type=int, default=S)
    p.add_argument("--de-split", dest="de_split", default=S)


def _add_instance(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--instance", default=S, help="kstar | poly | uniform | allbest")
    p.add_argument("--K", default=S, help="arms; comma list sweeps")
    p.add_argument("--N", default=S, help="samples per arm; comma list sweeps")
    p.add_argument("--kstar", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--beta", type=float, default=S)
    p.add_argument("--mu-top", dest="mu_top", type=float, default=S)
    p.add_argument("--mu-bot", dest="mu_bot", type=float, default=S)
    p.add_argument("--lo", type=float, default=S)
    p.add_argument("--hi", type=float, default=S)
    p.add_argument("--reward", default=S, help="bernoulli | gaussian_unit")
    p.add_argument("--instance-seed", dest="instance_seed", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="maxmean", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mse", "bounds"):
        p = sub.add_parser(name)
        _add_common(p)
        _add_instance(p)
    p = sub.add_parser("qlearn")
    _add_common(p)
    p.add_argument("--M", type=int, default=S, help="action duplication (4 = inflated)")
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--width", type=int, default=S)
    p.add_argument("--height", type=int, default=S)
    p.add_argument("--lr", default=S, help="learning rate or 'poly'")
    p.add_argument("--eps-greedy", dest="eps_greedy", type=float, default=S)
    p.add_argument("--eta", type=float, default=S)
    p = sub.add_parser("mcts")
    _add_common(p)
    p.add_argument("--env", default=S, help="2x2 | 4x4 | 8x8")
    p.add_argument("--simulations", default=S, help="comma list")
    p.add_argument("--ucb-c", dest="ucb_c", type=float, default=S)
    return parser


def resolve_config(argv) -> tuple[RunConfig, bool]:
    ns = vars(build_parser().parse_args(argv))
    dump = bool(ns.pop("dump_config", False))
    merged: dict = {}
    if "jobs" not in ns and os.environ.get("MAXMEAN_JOBS"):
        try:
            merged["jobs"] = int(os.environ["MAXMEAN_JOBS"])
        except ValueError:
            raise ConfigError("jobs", "MAXMEAN_JOBS is not an integer") from None
    path = ns.pop("config", None)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", f"cannot read {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        if data.get("command", ns["command"]) != ns["command"]:
            raise ConfigError("command", f"file says {data['command']!r}")
        merged.update(data)
    merged.update(ns)
    return validate(RunConfig.from_dict(merged)), dump


def _pmap(fn, arglists, jobs):
    if jobs <= 1:
        return [fn(*a) for a in arglists]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*arglists)))


def _out_path(base: str, tag: str, many: bool) -> Path:
    p = Path(base)
    return p.with_name(f"{p.stem}.{tag}{p.suffix}") if many else p


def mse_rows(cfg: RunConfig) -> list[mse_lab.SweepRow]:
    if len(cfg.K) > 1:
        axis, values = "num_arms", cfg.K
        family = lambda K: cfg.recipe(K, cfg.N[0]).build()  # noqa: E731
    else:
        axis, values = "samples_per_arm", cfg.N
        family = lambda N: cfg.recipe(cfg.K[0], N).build()  # noqa: E731
    return mse_lab.sweep(family, cfg.estimators, axis, values, cfg.trials, cfg.seed,
                         experiment=cfg.instance, params=cfg.estimator_params(),
                         jobs=cfg.jobs)


def cmd_mse(cfg: RunConfig) -> None:
    rows = mse_rows(cfg)
    mse_lab.export_csv(rows, cfg.out)
    print(f"{'estimator':<16}{'K':>5}{'N':>7}{'mse':>14}{'bias':>14}{'variance':>14}")
    for r in rows:
        rep = r.report
        print(f"{r.estimator:<16}{r.K:>5}{r.N_axis:>7}"
              f"{rep.mse:>14.4e}{rep.bias:>14.4e}{rep.variance:>14.4e}")


def bounds_report(cfg: RunConfig) -> dict:
    K, N = cfg.K[0], cfg.N[0]
    spec = cfg.recipe(K, N).build()
    gs = mse_lab.good_sets(spec.means, N, K)
    terms = mse_lab.corollary7_bound(spec.means, N, K)
    return {"gamma": gs.gamma, "b_star": len(gs.b_star), "b_plus": len(gs.b_plus),
            **terms._asdict()}


def cmd_bounds(cfg: RunConfig) -> None:
    rep = bounds_report(cfg)
    for k, v in rep.items():
        print(f"{k}={mse_lab.fmt(v) if isinstance(v, float) else v}")


def _qlearn_trial(env, estimator, steps, seed, agent_kw):
    agent = qlearning.QAgent.for_env(env, **agent_kw)
    return qlearning.run(env, agent, steps, estimator, seed)


def cmd_qlearn(cfg: RunConfig) -> None:
    env = qlearning.GridWorld(width=cfg.width, height=cfg.height, M=cfg.M)
    agent_kw = dict(alpha="poly" if cfg.lr == "poly" else float(cfg.lr),
                    epsilon_greedy=cfg.eps_greedy, eta=cfg.eta,
                    params=cfg.estimator_params(),
                    keep_targets="de" in cfg.estimators)
    many = len(cfg.estimators) > 1
    refs = qlearning.reference_values(cfg.eta, env.terminal_bonus)
    print(f"reference start value: {refs['depth4']:.4f} (depth 4), {refs['depth3']:.4f} (depth 3)")
    print(f"{'estimator':<16}{'final mean reward':>20}{'start value':>14}")
    for est in cfg.estimators:
        args = [(env, est, cfg.steps, derive_seed(cfg.seed, t), agent_kw)
                for t in range(cfg.trials)]
        metrics = _pmap(_qlearn_trial, args, cfg.jobs)
        qlearning.export_metrics_csv(metrics, _out_path(cfg.out, est, many))
        final = sum(m.final_mean_reward(min(1000, cfg.steps)) for m in metrics) / len(metrics)
        start = sum(m.start_values[-1] for m in metrics) / len(metrics)
        print(f"{est:<16}{final:>20.4f}{start:>14.4f}")


def _mcts_trial(env, sims, est, seed, ucb_c, params):
    return mcts.run_episode(env, sims, est, seed, ucb_c=ucb_c, params=params)


def cmd_mcts(cfg: RunConfig) -> None:
    env = mcts.FrozenLake.named(cfg.env)
    rows = []
    print(f"{'estimator':<16}{'simulations':>12}{'mean reward':>14}")
    for est in cfg.estimators:
        for sims in cfg.simulations:
            args = [(env, sims, est, derive_seed(cfg.seed, t), cfg.ucb_c,
                     cfg.estimator_params()) for t in range(cfg.trials)]
            rewards = _pmap(_mcts_trial, args, cfg.jobs)
            rows += [(cfg.env, est, sims, t, r) for t, r in enumerate(rewards)]
            print(f"{est:<16}{sims:>12}{sum(rewards) / len(rewards):>14.3f}")
    mcts.export_results_csv(rows, cfg.out)


def main(argv=None) -> int:
    try:
        cfg, dump = resolve_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # argparse usage errors
        return int(e.code) if isinstance(e.code, int) else 2
    if dump:
        print(cfg.to_json())
        return 0
    try:
        {"mse": cmd_mse, "bounds": cmd_bounds, "qlearn": cmd_qlearn,
         "mcts": cmd_mcts}[cfg.command](cfg)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
