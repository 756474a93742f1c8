"""Experiment runner: seeded multi-run simulations, expected-regret
tracking against the exact oracle, aggregation, and file output.

Per-round regret is the gap in expected payoff between the hindsight
oracle (which knows the value parameter and the HOB distribution) and the
chosen bid, both evaluated at the model value theta @ x; realized payoffs
are logged alongside for diagnostics only.  Runs are seeded with a
splittable counter-based generator (Philox keyed through SeedSequence
spawning), so every output byte except the summary timestamp is a
function of (config, seed).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import Context, Policy, run_auction
from .envs import (
    Environment,
    LowerBoundEnv,
    PeriodicEnv,
    SimpleEnv,
    expected_reward,
    make_hob,
    oracle_best,
)
from .master_policy import MasterPolicy
from .practical import LinUcbPolicy, TesPolicy

__all__ = [
    "CHECKPOINT_PERCENTS",
    "CSV_HEADER",
    "ExperimentConfig",
    "OraclePolicy",
    "RunResult",
    "aggregate",
    "emit",
    "load_config",
    "run_experiment",
]

POLICY_NAMES = ("master", "linucb_tes", "linucb", "oracle")
ENV_NAMES = ("periodic", "lower_bound", "custom")
CHECKPOINT_PERCENTS = (1, 2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
CSV_HEADER = ["t", "bid", "won", "payment", "outcome", "branch", "inst_regret", "cum_regret"]
_DEFAULT_D = {"periodic": 11, "lower_bound": 3, "custom": 3}


@dataclass
class ExperimentConfig:
    """One experiment: policies x runs on a single environment."""

    policies: tuple[str, ...]
    env: str
    T: int
    d: int | None = None
    runs: int = 1
    seed: int = 0
    out_dir: str = "results"
    plot: bool = False
    workers: int = 1
    policy_params: dict = field(default_factory=dict)
    env_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.policies, str):
            self.policies = (self.policies,)
        self.policies = tuple(self.policies)
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ValueError(f"unknown policies {unknown}; choose from {POLICY_NAMES}")
        if self.env not in ENV_NAMES:
            raise ValueError(f"unknown environment {self.env!r}; choose from {ENV_NAMES}")
        if self.T < 4:
            raise ValueError("horizon must be at least 4")
        if self.runs < 1:
            raise ValueError("need at least one run")
        if self.d is None:
            self.d = _DEFAULT_D[self.env]


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read a JSON config file; keyword overrides win over file values."""
    raw = json.loads(Path(path).read_text())
    if "policy" in raw:
        raw["policies"] = raw.pop("policy")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**raw)


@dataclass
class RunResult:
    """Per-round trajectory of a single seeded run."""

    policy: str
    run: int
    t: np.ndarray
    bid: np.ndarray
    won: np.ndarray
    payment: np.ndarray
    outcome: np.ndarray
    branch: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_regret(self) -> float:
        return float(self.cum_regret[-1])


class OraclePolicy(Policy):
    """Hindsight bidder that knows the value parameter and the HOB law."""

    def __init__(self, env: Environment):
        self.env = env
        self.last_branch = "-"

    def choose(self, t: int, context: Context) -> float:
        v = self.env.true_value(context)
        best = self.env.hob.exact_best(v)
        if best is None:
            best = oracle_best(self.env.hob, v)
        return best.bid

    def update(self, t, bid, feedback):
        pass


def _rngs(seed: int, run: int) -> tuple[np.random.Generator, ...]:
    root = np.random.SeedSequence(entropy=seed, spawn_key=(run,))
    return tuple(np.random.Generator(np.random.Philox(s)) for s in root.spawn(3))


def make_env(config: ExperimentConfig, rng: np.random.Generator) -> Environment:
    params = dict(config.env_params)
    if config.env == "periodic":
        return PeriodicEnv(rng=rng, d=config.d)
    if config.env == "lower_bound":
        return LowerBoundEnv(T=config.T, d=config.d, rng=rng)
    hob_cfg = dict(params.pop("hob", {"family": "uniform"}))
    hob = make_hob(hob_cfg.pop("family", "uniform"), **hob_cfg)
    return SimpleEnv(rng=rng, d=config.d, hob=hob, **params)


def make_policy(
    name: str, env: Environment, config: ExperimentConfig, rng: np.random.Generator
) -> Policy:
    pp = dict(config.policy_params)
    hob_params = env.hob.local_params()
    if name == "master":
        return MasterPolicy(
            T=config.T, d=config.d, params=hob_params, rng=rng,
            calibration=pp.get("calibration", "desk_master"),
            audit=pp.get("audit", False),
        )
    if name == "linucb_tes":
        return TesPolicy(
            T=config.T, d=config.d, params=hob_params, rng=rng,
            eta=pp.get("eta", 1.0),
            calibration=pp.get("calibration", "desk_tes"),
        )
    if name == "linucb":
        return LinUcbPolicy(d=config.d, alpha=pp.get("alpha", 1.0))
    if name == "oracle":
        return OraclePolicy(env)
    raise ValueError(f"unknown policy {name!r}")


def simulate_run(config: ExperimentConfig, policy_name: str, run: int) -> RunResult:
    """One seeded trajectory.

    The environment stream (contexts and hidden draws) depends only on
    (seed, run), never on the policy, so different policies at the same
    seed face identical markets.
    """
    env_build_rng, env_rng, policy_rng = _rngs(config.seed, run)
    env = make_env(config, env_build_rng)
    policy = make_policy(policy_name, env, config, policy_rng)
    T = config.T
    bids = np.empty(T)
    wons = np.empty(T, dtype=bool)
    payments = np.full(T, np.nan)
    outcomes = np.empty(T)
    branches = np.empty(T, dtype="U7")
    inst = np.empty(T)
    for i in range(T):
        t = i + 1
        ctx, m, v1, v0 = env.step(t, env_rng)
        bid = policy.choose(t, ctx)
        fb = run_auction(m, (v1, v0), bid)
        policy.update(t, bid, fb)
        v = env.true_value(ctx)
        inst[i] = env.oracle_reward(v) - expected_reward(env.hob, v, bid)
        bids[i] = bid
        wons[i] = fb.won
        if fb.won:
            payments[i] = fb.payment
        outcomes[i] = fb.observed_outcome
        branches[i] = policy.last_branch
    diagnostics = {"clip_stats": env.clip_stats()}
    if isinstance(policy, MasterPolicy):
        diagnostics["explore_rounds"] = len(policy.explore_log)
        diagnostics["level_counts"] = [int(c) for c in policy.level_counts]
        diagnostics["exploit_rounds"] = policy.exploit_count
    if isinstance(policy, TesPolicy):
        diagnostics["explore_rounds"] = policy.explore_count
    return RunResult(
        policy=policy_name, run=run, t=np.arange(1, T + 1), bid=bids, won=wons,
        payment=payments, outcome=outcomes, branch=branches,
        inst_regret=inst, cum_regret=np.cumsum(inst), diagnostics=diagnostics,
    )


def run_experiment(config: ExperimentConfig) -> dict[str, list[RunResult]]:
    """All (policy, run) trajectories, keyed by policy, ordered by run index."""
    jobs = [(p, r) for p in config.policies for r in range(config.runs)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_simulate_star, [(config, p, r) for p, r in jobs]))
    else:
        results = [simulate_run(config, p, r) for p, r in jobs]
    out: dict[str, list[RunResult]] = {p: [] for p in config.policies}
    for res in results:
        out[res.policy].append(res)
    for p in out:
        out[p].sort(key=lambda r: r.run)
    return out


def _simulate_star(args):
    return simulate_run(*args)


def checkpoint_rounds(T: int) -> list[int]:
    return [max(1, round(p * T / 100)) for p in CHECKPOINT_PERCENTS]


def aggregate(streams: list[RunResult]) -> dict:
    """Mean and standard deviation of cumulative regret at the checkpoints."""
    if not streams:
        raise ValueError("nothing to aggregate")
    T = len(streams[0].cum_regret)
    rounds = checkpoint_rounds(T)
    at = np.array([[s.cum_regret[r - 1] for r in rounds] for s in streams])
    ddof = 1 if len(streams) > 1 else 0
    return {
        "runs": len(streams),
        "checkpoint_percents": list(CHECKPOINT_PERCENTS),
        "checkpoint_rounds": rounds,
        "mean_cum_regret": at.mean(axis=0).tolist(),
        "std_cum_regret": at.std(axis=0, ddof=ddof).tolist(),
        "final_cum_regret_per_run": [s.final_regret for s in streams],
        "explore_rounds_per_run": [
            s.diagnostics.get("explore_rounds") for s in streams
        ],
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, res: RunResult) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(res.t)):
            pay = "" if math.isnan(res.payment[i]) else _fmt(res.payment[i])
            w.writerow([
                int(res.t[i]), _fmt(res.bid[i]), int(res.won[i]), pay,
                _fmt(res.outcome[i]), res.branch[i],
                _fmt(res.inst_regret[i]), _fmt(res.cum_regret[i]),
            ])


def _plot_regret(path: Path, summaries: dict[str, dict], streams: dict[str, list[RunResult]]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "causalbid"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for policy, runs in streams.items():
        T = len(runs[0].cum_regret)
        step = max(1, T // 512)
        xs = np.arange(1, T + 1)[::step]
        curves = np.stack([r.cum_regret[::step] for r in runs])
        mean = curves.mean(axis=0)
        std = curves.std(axis=0, ddof=1 if len(runs) > 1 else 0)
        ax.plot(xs, mean, label=policy)
        ax.fill_between(xs, mean - std, mean + std, alpha=0.25, linewidth=0)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative expected regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit(
    summary: dict[str, dict],
    streams: dict[str, list[RunResult]],
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> list[Path]:
    """Write per-run CSVs, summary.json, and (optionally) regret.svg."""
    if not streams or not any(streams.values()):
        raise ValueError("no run streams to emit")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = []
    for policy, runs in streams.items():
        for res in runs:
            p = out / f"{policy}_run{res.run:03d}.csv"
            _write_csv(p, res)
            paths.append(p)
    doc = {
        "config": {**asdict(config), "policies": list(config.policies)},
        "rng": "numpy Philox counter-based generator, SeedSequence(entropy=seed, "
               "spawn_key=(run,)) split into (env-build, env-stream, policy) streams",
        "policies": summary,
        "diagnostics": {
            policy: [r.diagnostics for r in runs] for policy, runs in streams.items()
        },
        "metadata": {"written_unix_time": time.time()},
    }
    spath = out / "summary.json"
    spath.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(spath)
    if config.plot:
        ppath = out / "regret.svg"
        _plot_regret(ppath, summary, streams)
        paths.append(ppath)
    return paths
