"""Policy evaluation, switchable rollouts and the training-comparison driver.

The ``RolloutStepper`` is the single stepping engine behind plain rollouts,
mid-episode policy switches and the live steering server, so a steered
session and an offline switch rollout replay bit-identically from the same
seed: the environment is seeded with the rollout seed and one dedicated
generator drives policy sampling, shared across a switch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import moppo, rngutil
from .env import DefenceEnv, Game, GameSpec
from .nn import PolicyCheckpoint
from .pareto import WeightVector
from .policies import policy_from_checkpoint
from .serialize import fmt6, jsonl_line, write_jsonl


def _default_factory(game: GameSpec, scenario, sim_config):
    from .simnet import Scenario, SimConfig

    scen = scenario if scenario is not None else Scenario.MODIFIED_9U6E
    sim = sim_config if sim_config is not None else SimConfig(scenario=scen)

    def env_factory():
        return DefenceEnv(game, sim)

    return env_factory


def _as_policy(policy, mode=None, tag=None):
    if isinstance(policy, PolicyCheckpoint):
        return policy_from_checkpoint(policy, mode=mode, tag=tag)
    return policy


@dataclass
class EvalSummary:
    """Per-objective episode-return statistics for one policy."""

    mean: list[float]        # undiscounted
    std: list[float]
    disc_mean: list[float]   # discounted at the game's gamma
    disc_std: list[float]
    n_episodes: int
    tag: object = None

    def as_dict(self) -> dict:
        return {
            "tag": "" if self.tag is None else str(self.tag),
            "n_episodes": self.n_episodes,
            "mean": self.mean,
            "std": self.std,
            "disc_mean": self.disc_mean,
            "disc_std": self.disc_std,
        }


def evaluate(
    policy,
    game: GameSpec,
    scenario=None,
    sim_config=None,
    n_episodes: int = 1000,
    seed: int = 0,
    env_factory=None,
    tag: object = None,
    mode: str | None = None,
) -> EvalSummary:
    """Seeded episode returns: mean and std per objective, both conventions."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if env_factory is None:
        env_factory = _default_factory(game, scenario, sim_config)
    pol = _as_policy(policy, mode=mode, tag=tag)
    undisc = np.zeros((n_episodes, game.n_obj))
    disc = np.zeros((n_episodes, game.n_obj))
    for ep in range(n_episodes):
        env = env_factory()
        obs = env.reset(rngutil.subseed(seed, rngutil.EVAL, ep))
        rng = rngutil.rng_from(seed, rngutil.EVAL, ep, 1)
        pol.begin_episode()
        factor = 1.0
        done = False
        while not done:
            res = env.step(pol.act(obs, rng))
            pol.observe(res.reward)
            undisc[ep] += res.reward
            disc[ep] += factor * res.reward
            factor *= game.gamma
            obs = res.obs
            done = res.done
    return EvalSummary(
        mean=[float(v) for v in undisc.mean(axis=0)],
        std=[float(v) for v in undisc.std(axis=0)],
        disc_mean=[float(v) for v in disc.mean(axis=0)],
        disc_std=[float(v) for v in disc.std(axis=0)],
        n_episodes=n_episodes,
        tag=tag,
    )


@dataclass
class RolloutRecord:
    seed: int
    game: str
    steps: list[dict] = field(default_factory=list)

    @property
    def final_return(self) -> np.ndarray:
        if not self.steps:
            return np.zeros(0)
        return np.array(self.steps[-1]["cum_return"])

    def policy_timeline(self) -> list:
        return [s["policy"] for s in self.steps]

    def lines(self) -> list[str]:
        return [jsonl_line(s) for s in self.steps]


class RolloutStepper:
    """Step-at-a-time rollout with mid-episode policy switching."""

    def __init__(self, policy, game: GameSpec, seed: int,
                 scenario=None, sim_config=None, env_factory=None, tag=None):
        if env_factory is None:
            env_factory = _default_factory(game, scenario, sim_config)
        self.env = env_factory()
        self.game = game
        self.seed = seed
        self.policy = _as_policy(policy, tag=tag)
        self.policy_tag = tag if tag is not None else getattr(self.policy, "tag", None)
        self.sample_rng = rngutil.rng_from(seed, rngutil.POLICY)
        self.obs = self.env.reset(seed)
        self.policy.begin_episode()
        self.cum = np.zeros(game.n_obj)
        self.t = 0
        self.done = False
        self.record = RolloutRecord(seed=seed, game=game.game.value)

    def set_policy(self, policy, tag=None) -> None:
        """Takes effect from the next step; resets per-episode policy state."""
        self.policy = _as_policy(policy, tag=tag)
        self.policy_tag = tag if tag is not None else getattr(self.policy, "tag", None)
        self.policy.begin_episode()

    def step(self) -> dict:
        if self.done:
            raise RuntimeError("episode already finished")
        action = self.policy.act(self.obs, self.sample_rng)
        res = self.env.step(action)
        self.policy.observe(res.reward)
        self.cum = self.cum + res.reward
        self.t += 1
        entry = {
            "t": self.t,
            "action_index": int(action),
            "policy": None if self.policy_tag is None else str(self.policy_tag),
            "reward": [float(v) for v in res.reward],
            "components": res.components.as_dict() if res.components is not None else None,
            "cum_return": [float(v) for v in self.cum],
            "done": res.done,
        }
        self.record.steps.append(entry)
        self.obs = res.obs
        self.done = res.done
        return entry


def rollout(policy, game: GameSpec, seed: int, scenario=None, sim_config=None,
            env_factory=None, tag=None) -> RolloutRecord:
    stepper = RolloutStepper(policy, game, seed, scenario, sim_config, env_factory, tag)
    while not stepper.done:
        stepper.step()
    return stepper.record


def switch_rollout(policy_a, policy_b, t_switch: int, game: GameSpec, seed: int,
                   scenario=None, sim_config=None, env_factory=None,
                   tag_a="a", tag_b="b") -> RolloutRecord:
    """policy_a acts for t < t_switch, policy_b afterwards."""
    if not 0 < t_switch < game.episode_length:
        raise ValueError(f"t_switch {t_switch} outside (0, {game.episode_length})")
    stepper = RolloutStepper(policy_a, game, seed, scenario, sim_config, env_factory, tag_a)
    while not stepper.done:
        if stepper.t == t_switch:
            stepper.set_policy(policy_b, tag_b)
        stepper.step()
    return stepper.record


# --- training-comparison driver ----------------------------------------------

@dataclass
class Experiment1Config:
    base: moppo.PpoConfig
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    scenario: object = None
    sim_config: object = None
    env_factory: object = None
    gamma: float = 0.99
    episode_length: int = 512


def _curve_stats(logs: list[list[dict]], key: str) -> list[dict]:
    points = []
    for i in range(len(logs[0])):
        step = logs[0][i]["global_step"]
        vals = np.array([lg[i][key] for lg in logs], dtype=np.float64)
        points.append({"global_step": step, "mean": float(vals.mean()), "std": float(vals.std())})
    return points


def _steps_to_90pct(curve: list[dict]) -> int:
    start, terminal = curve[0]["mean"], curve[-1]["mean"]
    threshold = start + 0.9 * (terminal - start)
    for pt in curve:
        if (terminal >= start and pt["mean"] >= threshold) or (
            terminal < start and pt["mean"] <= threshold
        ):
            return int(pt["global_step"])
    return int(curve[-1]["global_step"])


def run_experiment_1(cfg: Experiment1Config, out_dir: str | Path | None = None) -> dict:
    """Single-objective PPO (summed reward) vs equal-weight two-objective PPO.

    Both run at matched budgets over the same seed set; curves are compared on
    the summed-return scale, which the decomposition identity makes common to
    both games.
    """
    game_a = GameSpec(Game.A, gamma=cfg.gamma, episode_length=cfg.episode_length)
    game_b = GameSpec(Game.B, gamma=cfg.gamma, episode_length=cfg.episode_length)
    ppo_logs, moppo_logs = [], []
    for seed in cfg.seeds:
        ppo_cfg = replace(cfg.base, seed=seed, weights=WeightVector.of([1.0]))
        _, log_a = moppo.train(ppo_cfg, game_a, scenario=cfg.scenario,
                               sim_config=cfg.sim_config, env_factory=cfg.env_factory)
        ppo_logs.append(log_a)
        mo_cfg = replace(cfg.base, seed=seed, weights=WeightVector.of([0.5, 0.5]))
        _, log_b = moppo.train(mo_cfg, game_b, scenario=cfg.scenario,
                               sim_config=cfg.sim_config, env_factory=cfg.env_factory)
        moppo_logs.append(log_b)

    report = {
        "seeds": list(cfg.seeds),
        "ppo_curve": _curve_stats(ppo_logs, "summed_return"),
        "moppo_curve": _curve_stats(moppo_logs, "summed_return"),
        "moppo_objective_curves": [
            _curve_stats(
                [[{"global_step": e["global_step"], "v": e["mean_return"][k]} for e in lg]
                 for lg in moppo_logs],
                "v",
            )
            for k in range(2)
        ],
    }
    if all("mean_components" in e for lg in ppo_logs for e in lg):
        report["ppo_component_curves"] = [
            _curve_stats(
                [[{"global_step": e["global_step"], "v": e["mean_components"][k]} for e in lg]
                 for lg in ppo_logs],
                "v",
            )
            for k in range(4)
        ]
    ppo_terminal = report["ppo_curve"][-1]["mean"]
    moppo_terminal = report["moppo_curve"][-1]["mean"]
    diff_pct = (
        100.0 * (moppo_terminal - ppo_terminal) / abs(ppo_terminal)
        if ppo_terminal != 0
        else float("inf")
    )
    report["ppo_terminal_return"] = ppo_terminal
    report["moppo_terminal_return"] = moppo_terminal
    report["terminal_return_diff_pct"] = diff_pct
    report["moppo_not_worse"] = bool(moppo_terminal >= ppo_terminal)
    report["ppo_steps_to_90pct"] = _steps_to_90pct(report["ppo_curve"])
    report["moppo_steps_to_90pct"] = _steps_to_90pct(report["moppo_curve"])

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "experiment1_ppo_curve.jsonl", report["ppo_curve"])
        write_jsonl(out / "experiment1_moppo_curve.jsonl", report["moppo_curve"])
        (out / "experiment1_report.json").write_text(jsonl_line(report) + "\n", encoding="utf-8")
    return report


# --- exports -------------------------------------------------------------------

SWEEP_HEADER = ["w_green", "obj0_mean", "obj0_std", "obj1_mean", "obj1_std",
                "n_episodes", "strategy", "tag"]


def write_sweep_csv(path, rows: list[dict]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_HEADER)
            for r in rows:
                writer.writerow(
                    [fmt6(r["w_green"]), fmt6(r["obj0_mean"]), fmt6(r["obj0_std"]),
                     fmt6(r["obj1_mean"]), fmt6(r["obj1_std"]), int(r["n_episodes"]),
                     r["strategy"], r["tag"]]
                )
    except OSError as e:
        raise OSError(f"cannot write sweep CSV to {path}: {e}") from e


def read_sweep_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for r in reader:
            rows.append(
                {
                    "w_green": float(r["w_green"]),
                    "obj0_mean": float(r["obj0_mean"]),
                    "obj0_std": float(r["obj0_std"]),
                    "obj1_mean": float(r["obj1_mean"]),
                    "obj1_std": float(r["obj1_std"]),
                    "n_episodes": int(r["n_episodes"]),
                    "strategy": r["strategy"],
                    "tag": r["tag"],
                }
            )
    return rows


def export_rollout(record: RolloutRecord, path) -> None:
    try:
        write_jsonl(path, record.steps)
    except OSError as e:
        raise OSError(f"cannot write rollout to {path}: {e}") from e


def export_summaries(summaries: list[EvalSummary], path) -> None:
    try:
        write_jsonl(path, [s.as_dict() for s in summaries])
    except OSError as e:
        raise OSError(f"cannot write summaries to {path}: {e}") from e
