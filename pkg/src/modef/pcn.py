"""Pareto Conditioned Network trainer.

A single categorical network is trained by supervised learning on its own
best episodes: each transition is labelled with the action actually taken,
conditioned on the return still to come and the steps remaining. The replay
buffer keeps the highest-ranked episodes (non-dominated returns first, then
crowding, then recency); commands for new episodes are drawn from the
non-dominated tier with Gaussian exploration noise on one objective. At
inference the net is prompted with a target return vector and horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn, rngutil
from .env import DefenceEnv, GameSpec
from .errors import ConfigurationError
from .nn import NetSpec, OptState, Params, PolicyCheckpoint
from .pareto import ParetoPoint, dominates, hypervolume_2d, pareto_prune
from .policies import conditioned_obs
from .serialize import write_jsonl


@dataclass
class PcnConfig:
    total_timesteps: int = 500_000
    batch_size: int = 256
    max_buffer_size: int = 50
    num_er_episodes: int = 20
    num_step_episodes: int = 10
    num_model_updates: int = 50
    learning_rate: float = 1e-3
    gamma: float = 1.0
    hidden_dim: int = 64
    noise: float = 0.1
    scaling_factor: tuple[float, ...] = (1.0, 1.0, 0.1)
    ref_point: tuple[float, float] = (-500.0, 6500.0)   # reported verbatim in logs
    hv_ref_point: tuple[float, float] = (-6000.0, 0.0)  # used for hypervolume
    max_return: tuple[float, float] = (0.0, 10_000.0)
    num_points_pf: int = 100
    max_steps: int = 512
    seed: int = 0
    eval_freq: int = 50_000

    @property
    def n_obj(self) -> int:
        return len(self.scaling_factor) - 1

    @property
    def hidden_dims(self) -> tuple[int, int]:
        return (self.hidden_dim, self.hidden_dim)


@dataclass
class EpisodeRecord:
    observations: np.ndarray  # [T, obs_dim]
    actions: np.ndarray       # [T]
    rewards: np.ndarray       # [T, n_obj]

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        # return still to come at each step (includes the step's own reward)
        self.return_to_go = np.cumsum(self.rewards[::-1], axis=0)[::-1].copy()
        self.total_return = self.rewards.sum(axis=0)

    @property
    def length(self) -> int:
        return int(self.actions.shape[0])


@dataclass
class Command:
    desired_return: np.ndarray
    desired_horizon: int

    def __post_init__(self):
        self.desired_return = np.asarray(self.desired_return, dtype=np.float64)
        self.desired_horizon = int(self.desired_horizon)
        if self.desired_horizon < 1:
            raise ValueError("desired horizon must be >= 1")


def _multiset_crowding(returns: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Positional crowding over the raw return multiset.

    Unlike the front-analysis ``crowding_distances``, duplicates here count as
    maximally crowded (their sorted neighbours are their twins), which is what
    keeps the buffer from being flooded by many copies of one return. Sort ties
    resolve by insertion counter, so the ranking is reproducible.
    """
    n, n_obj = returns.shape
    dist = np.zeros(n)
    for k in range(n_obj):
        vals = returns[:, k]
        lo, hi = vals.min(), vals.max()
        rng = hi - lo
        if rng == 0.0:
            continue
        order = np.lexsort((counters, vals))
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        inner = order[1:-1]
        dist[inner] += (vals[order[2:]] - vals[order[:-2]]) / rng
    return dist


class ReplayBuffer:
    """Bounded episode store ranked by non-dominance, crowding and age."""

    def __init__(self, max_size: int):
        self.max_size = max_size
        self.entries: list[tuple[int, EpisodeRecord]] = []
        self._counter = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def episodes(self) -> list[EpisodeRecord]:
        return [ep for _, ep in self.entries]

    def returns(self) -> np.ndarray:
        return np.array([ep.total_return for _, ep in self.entries])

    def nd_mask(self) -> np.ndarray:
        rets = self.returns()
        n = len(rets)
        mask = np.ones(n, dtype=bool)
        for i in range(n):
            if any(dominates(rets[j], rets[i]) for j in range(n) if j != i):
                mask[i] = False
        return mask

    def insert(self, ep: EpisodeRecord) -> EpisodeRecord | None:
        """Append; over capacity, evict the worst episode and return it."""
        self.entries.append((self._counter, ep))
        self._counter += 1
        if len(self.entries) <= self.max_size:
            return None
        nd = self.nd_mask()
        candidates = [k for k in range(len(self.entries)) if not nd[k]]
        if not candidates:
            candidates = list(range(len(self.entries)))
        returns = np.array([self.entries[k][1].total_return for k in candidates])
        counters = np.array([self.entries[k][0] for k in candidates])
        crowd = _multiset_crowding(returns, counters)
        victim = min(
            range(len(candidates)),
            key=lambda j: (crowd[j], self.entries[candidates[j]][0]),
        )
        evicted = self.entries[candidates[victim]][1]
        del self.entries[candidates[victim]]
        return evicted


def buffer_insert(buffer: ReplayBuffer, ep: EpisodeRecord, cfg: PcnConfig) -> EpisodeRecord | None:
    if buffer.max_size != cfg.max_buffer_size:
        raise ConfigurationError("buffer size does not match the configuration")
    return buffer.insert(ep)


def select_command(buffer: ReplayBuffer, rng: np.random.Generator, cfg: PcnConfig) -> Command:
    """Non-dominated episode's return, one objective nudged by Gaussian noise."""
    if len(buffer) == 0:
        raise ValueError("cannot select a command from an empty buffer")
    nd = np.flatnonzero(buffer.nd_mask())
    pick = buffer.entries[nd[int(rng.integers(len(nd)))]][1]
    desired = pick.total_return.copy()
    stds = buffer.returns().std(axis=0)
    obj = int(rng.integers(desired.shape[0]))
    desired[obj] += rng.normal(0.0, cfg.noise * stds[obj])
    return Command(desired_return=desired, desired_horizon=max(1, pick.length - 2))


def make_ce_loss_head(labels: np.ndarray):
    """Cross-entropy against the actions actually taken."""
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(labels.shape[0])

    def head(logits: np.ndarray, values):
        logp = nn.log_softmax(logits)
        loss = -logp[rows, labels].mean()
        dlogits = np.exp(logp)
        dlogits[rows, labels] -= 1.0
        dlogits /= labels.shape[0]
        return loss, dlogits, None

    return head


def pcn_update(
    params: Params,
    opt: OptState,
    buffer: ReplayBuffer,
    cfg: PcnConfig,
    rng: np.random.Generator,
) -> float:
    """One supervised step on a uniformly sampled (episode, timestep) batch."""
    if len(buffer) == 0:
        raise ValueError("cannot update from an empty buffer")
    eps = buffer.episodes
    ep_idx = rng.integers(len(eps), size=cfg.batch_size)
    xs = np.zeros((cfg.batch_size, params.spec.input_dim))
    labels = np.zeros(cfg.batch_size, dtype=np.int64)
    scaling = np.asarray(cfg.scaling_factor, dtype=np.float64)
    for row, k in enumerate(ep_idx):
        ep = eps[int(k)]
        t = int(rng.integers(ep.length))
        xs[row] = conditioned_obs(ep.observations[t], ep.return_to_go[t], ep.length - t, scaling)
        labels[row] = ep.actions[t]
    loss, g = nn.grad(params, xs, make_ce_loss_head(labels))
    nn.opt_step(params, g, opt)
    return float(loss)


def pcn_act(
    params: Params,
    obs: np.ndarray,
    cmd: Command,
    cfg: PcnConfig,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
) -> int:
    """Greedy or sampled action for the prompted input.

    The caller keeps the command current: after each environment step,
    subtract the observed reward from the desired return and decrement the
    horizon (floored at 1).
    """
    x = conditioned_obs(obs, cmd.desired_return, cmd.desired_horizon, np.asarray(cfg.scaling_factor))
    logits, _ = nn.forward(params, x)
    if mode == "greedy":
        return int(np.argmax(logits))
    if rng is None:
        raise ValueError("sampling mode needs a generator")
    return int(nn.sample_categorical(rng, logits)[0])


def step_command(cmd: Command, reward: np.ndarray) -> None:
    cmd.desired_return = cmd.desired_return - np.asarray(reward, dtype=np.float64)
    cmd.desired_horizon = max(1, cmd.desired_horizon - 1)


def _collect_episode(env, seed: int, act_fn) -> EpisodeRecord:
    obs = env.reset(seed)
    observations, actions, rewards = [], [], []
    done = False
    while not done:
        a = act_fn(obs)
        res = env.step(a)
        observations.append(obs)
        actions.append(a)
        rewards.append(res.reward)
        obs = res.obs
        done = res.done
    return EpisodeRecord(np.array(observations), np.array(actions), np.array(rewards))


def _evaluation_targets(buffer: ReplayBuffer, cfg: PcnConfig) -> list[Command]:
    """num_points_pf commands spread evenly over the buffer's non-dominated tier."""
    nd = np.flatnonzero(buffer.nd_mask())
    sources = sorted(
        (buffer.entries[i][1] for i in nd), key=lambda ep: tuple(ep.total_return)
    )
    picks = np.linspace(0, len(sources) - 1, cfg.num_points_pf).round().astype(int)
    return [
        Command(sources[i].total_return.copy(), max(1, sources[i].length - 2)) for i in picks
    ]


def _front_snapshot(params, env_factory, targets, cfg, global_step, snap_idx):
    achieved = []
    for k, target in enumerate(targets):
        env = env_factory()
        cmd = Command(target.desired_return.copy(), target.desired_horizon)
        obs = env.reset(rngutil.subseed(cfg.seed, rngutil.EVAL, snap_idx, k))
        done = False
        total = np.zeros(cfg.n_obj)
        while not done:
            a = pcn_act(params, obs, cmd, cfg, mode="greedy")
            res = env.step(a)
            step_command(cmd, res.reward)
            total += res.reward
            obs = res.obs
            done = res.done
        achieved.append(ParetoPoint.of(total))
    front = pareto_prune(achieved)
    return {
        "global_step": int(global_step),
        "front": [[float(v) for v in p.f] for p in front.points],
        "hypervolume": hypervolume_2d(front, cfg.hv_ref_point) if cfg.n_obj == 2 else 0.0,
        "ref_point": list(cfg.ref_point),
        "hv_ref_point": list(cfg.hv_ref_point),
    }


def train_pcn(
    cfg: PcnConfig,
    game: GameSpec,
    scenario=None,
    sim_config=None,
    env_factory=None,
    out_dir: str | Path | None = None,
    checkpoint_name: str = "pcn",
    initial_front: list[ParetoPoint] | None = None,
    config_hash: str = "",
) -> tuple[PolicyCheckpoint, list[dict]]:
    """Train, periodically logging the pruned front of prompted evaluations.

    ``initial_front``, when given, seeds the first evaluation-target list
    (later snapshots prompt along the buffer's own non-dominated returns).
    """
    if env_factory is None:
        from .simnet import Scenario, SimConfig

        scen = scenario if scenario is not None else Scenario.MODIFIED_9U6E
        sim = sim_config if sim_config is not None else SimConfig(scenario=scen)

        def env_factory():
            return DefenceEnv(game, sim)

    probe = env_factory()
    n_obj = game.n_obj
    if n_obj != cfg.n_obj:
        raise ConfigurationError(
            f"game has {n_obj} objectives but scaling_factor implies {cfg.n_obj}"
        )
    spec = NetSpec(
        input_dim=probe.obs_dim + n_obj + 1,
        policy_out=probe.n_actions,
        value_heads=0,
        hidden_dims=cfg.hidden_dims,
    )
    params = nn.init(spec, cfg.seed)
    opt = OptState.for_params(params, cfg.learning_rate, max_grad_norm=0.5)
    er_rng = rngutil.rng_from(cfg.seed, rngutil.BUFFER)
    cmd_rng = rngutil.rng_from(cfg.seed, rngutil.COMMAND)
    batch_rng = rngutil.rng_from(cfg.seed, rngutil.SHUFFLE)
    act_rng = rngutil.rng_from(cfg.seed, rngutil.ROLLOUT)

    buffer = ReplayBuffer(cfg.max_buffer_size)
    global_step = 0
    episode_counter = 0

    for _ in range(cfg.num_er_episodes):
        env = env_factory()
        seed = rngutil.subseed(cfg.seed, rngutil.ENV, episode_counter)
        ep = _collect_episode(env, seed, lambda obs: int(er_rng.integers(probe.n_actions)))
        buffer_insert(buffer, ep, cfg)
        global_step += ep.length
        episode_counter += 1

    front_log: list[dict] = []
    next_eval = cfg.eval_freq
    snap_idx = 0
    pending_initial = (
        [Command(np.array(p.f, dtype=np.float64), max(1, cfg.max_steps - 2)) for p in initial_front]
        if initial_front
        else None
    )

    while global_step < cfg.total_timesteps:
        for _ in range(cfg.num_model_updates):
            pcn_update(params, opt, buffer, cfg, batch_rng)
        for _ in range(cfg.num_step_episodes):
            cmd = select_command(buffer, cmd_rng, cfg)
            env = env_factory()
            seed = rngutil.subseed(cfg.seed, rngutil.ENV, episode_counter)

            def act(obs, _cmd=cmd):
                return pcn_act(params, obs, _cmd, cfg, mode="sample", rng=act_rng)

            obs = env.reset(seed)
            observations, actions, rewards = [], [], []
            done = False
            while not done:
                a = act(obs)
                res = env.step(a)
                observations.append(obs)
                actions.append(a)
                rewards.append(res.reward)
                step_command(cmd, res.reward)
                obs = res.obs
                done = res.done
            ep = EpisodeRecord(np.array(observations), np.array(actions), np.array(rewards))
            buffer_insert(buffer, ep, cfg)
            global_step += ep.length
            episode_counter += 1
        if global_step >= next_eval or global_step >= cfg.total_timesteps:
            if pending_initial is not None:
                targets = pending_initial
                pending_initial = None
            else:
                targets = _evaluation_targets(buffer, cfg)
            front_log.append(
                _front_snapshot(params, env_factory, targets, cfg, global_step, snap_idx)
            )
            snap_idx += 1
            while next_eval <= global_step:
                next_eval += cfg.eval_freq

    if not front_log:
        targets = pending_initial if pending_initial is not None else _evaluation_targets(buffer, cfg)
        front_log.append(_front_snapshot(params, env_factory, targets, cfg, global_step, snap_idx))

    final_front = front_log[-1]["front"]
    default_target = final_front[len(final_front) // 2] if final_front else list(cfg.max_return)
    ckpt = PolicyCheckpoint(
        spec=spec,
        params=params.vec.copy(),
        trainer="pcn",
        n_obj=n_obj,
        seed=cfg.seed,
        scaling=list(cfg.scaling_factor),
        config_hash=config_hash,
        extra={
            "front": final_front,
            "default_target": default_target,
            "default_horizon": max(1, cfg.max_steps - 2),
            "game": game.game.value,
            "episode_length": game.episode_length,
        },
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        nn.save_checkpoint(ckpt, out / checkpoint_name)
        write_jsonl(out / f"{checkpoint_name}.front.jsonl", front_log)
    return ckpt, front_log


def evaluate_points(
    ckpt: PolicyCheckpoint,
    targets: list[Command],
    episodes_per_target: int,
    game: GameSpec,
    cfg: PcnConfig,
    scenario=None,
    sim_config=None,
    env_factory=None,
    seed: int = 0,
) -> list[dict]:
    """Greedy rollouts per prompt; per-objective mean and std of achieved returns."""
    if not targets:
        raise ValueError("no targets given")
    if env_factory is None:
        from .simnet import Scenario, SimConfig

        scen = scenario if scenario is not None else Scenario.MODIFIED_9U6E
        sim = sim_config if sim_config is not None else SimConfig(scenario=scen)

        def env_factory():
            return DefenceEnv(game, sim)

    params = ckpt.to_params()
    rows = []
    for k, target in enumerate(targets):
        achieved = np.zeros((episodes_per_target, game.n_obj))
        for ep_i in range(episodes_per_target):
            env = env_factory()
            cmd = Command(target.desired_return.copy(), target.desired_horizon)
            obs = env.reset(rngutil.subseed(seed, rngutil.EVAL, k, ep_i))
            done = False
            while not done:
                a = pcn_act(params, obs, cmd, cfg, mode="greedy")
                res = env.step(a)
                step_command(cmd, res.reward)
                achieved[ep_i] += res.reward
                obs = res.obs
                done = res.done
        rows.append(
            {
                "target": [float(v) for v in target.desired_return],
                "horizon": int(target.desired_horizon),
                "mean": [float(v) for v in achieved.mean(axis=0)],
                "std": [float(v) for v in achieved.std(axis=0)],
                "n_episodes": episodes_per_target,
            }
        )
    return rows


def write_points_csv(path, rows: list[dict]) -> None:
    import csv

    from .serialize import fmt6

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["target_obj0", "target_obj1", "horizon",
             "mean_obj0", "std_obj0", "mean_obj1", "std_obj1", "n_episodes"]
        )
        for r in rows:
            writer.writerow(
                [fmt6(r["target"][0]), fmt6(r["target"][1]), r["horizon"],
                 fmt6(r["mean"][0]), fmt6(r["std"][0]),
                 fmt6(r["mean"][1]), fmt6(r["std"][1]), r["n_episodes"]]
            )
