"""Multi-objective PPO: vector advantages scalarized before the clipped loss.

The critic keeps one value head per objective and generalized advantage
estimation runs componentwise; the per-sample advantage vector is scalarized
(linear weighted sum or Chebyshev distance to a per-batch utopian point)
before entering the standard clipped policy objective. With one objective and
weight [1] every update is numerically identical to plain PPO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import nn, rngutil
from .env import DefenceEnv, GameSpec
from .errors import ConfigurationError
from .nn import NetSpec, OptState, Params, PolicyCheckpoint
from .pareto import FrontEstimate, ParetoPoint, UtopianPoint, WeightVector
from .serialize import write_jsonl

CHEBYSHEV_EPSILON = 0.1


class WeightingStrategy(Enum):
    LINEAR = "linear"
    CHEBYSHEV = "chebyshev"


@dataclass
class PpoConfig:
    total_timesteps: int = 750_000
    num_envs: int = 16
    num_steps: int = 512
    minibatches: int = 16
    update_epochs: int = 10
    learning_rate: float = 2.5e-4
    anneal_lr: bool = True
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_coef: float = 0.2
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    clip_vloss: bool = True
    norm_adv: bool = True
    max_grad_norm: float = 0.5
    weights: WeightVector = field(default_factory=lambda: WeightVector.of([1.0]))
    weighting_strategy: WeightingStrategy = WeightingStrategy.LINEAR
    seed: int = 0
    eval_freq: int = 50_000
    eval_episodes: int = 8
    hidden_dims: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if (self.num_envs * self.num_steps) % self.minibatches != 0:
            raise ConfigurationError(
                f"rollout size {self.num_envs * self.num_steps} not divisible by "
                f"{self.minibatches} minibatches"
            )

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.num_steps

    @property
    def n_obj(self) -> int:
        return len(self.weights.w)


@dataclass
class TrajectoryBatch:
    observations: np.ndarray   # [env, step, obs_dim]
    actions: np.ndarray        # [env, step]
    log_probs: np.ndarray      # [env, step]
    rewards: np.ndarray        # [env, step, n_obj]
    values: np.ndarray         # [env, step + 1, n_obj] (bootstrap included)
    dones: np.ndarray          # [env, step]
    advantages: np.ndarray | None = None  # [env, step, n_obj]
    returns: np.ndarray | None = None     # [env, step, n_obj]


def gae_vector(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise generalized advantage estimation.

    ``values`` carries the bootstrap row at index T. ``dones[t]`` flags that
    the state entered after step t was terminal, masking the bootstrap.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    squeeze = rewards.ndim == 2
    if squeeze:
        rewards, values, dones = rewards[None], values[None], dones[None]
    n_env, n_step, n_obj = rewards.shape
    if values.shape != (n_env, n_step + 1, n_obj) or dones.shape != (n_env, n_step):
        raise ValueError(
            f"shape mismatch: rewards {rewards.shape}, values {values.shape}, dones {dones.shape}"
        )
    adv = np.zeros_like(rewards)
    carry = np.zeros((n_env, n_obj), dtype=np.float64)
    for t in range(n_step - 1, -1, -1):
        mask = (1.0 - dones[:, t])[:, None]
        delta = rewards[:, t] + gamma * values[:, t + 1] * mask - values[:, t]
        carry = delta + gamma * lam * mask * carry
        adv[:, t] = carry
    rets = adv + values[:, :-1]
    if squeeze:
        return adv[0], rets[0]
    return adv, rets


def scalarize_advantages(adv: np.ndarray, cfg: PpoConfig) -> np.ndarray:
    """Collapse [N, n_obj] advantages to [N] per the configured strategy."""
    adv = np.asarray(adv, dtype=np.float64)
    w = cfg.weights.array()
    if adv.shape[1] != w.size:
        raise ValueError(f"advantage width {adv.shape[1]} != weight length {w.size}")
    if cfg.weighting_strategy == WeightingStrategy.LINEAR:
        return adv @ w
    z = UtopianPoint.from_batch(adv, CHEBYSHEV_EPSILON).array()
    return -(w * np.abs(z - adv)).max(axis=1)


def make_ppo_loss_head(
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    adv_scalar: np.ndarray,
    returns: np.ndarray,
    old_values: np.ndarray,
    cfg: PpoConfig,
    stats: dict | None = None,
):
    """Clipped-surrogate loss head for ``nn.grad`` over one minibatch."""
    acts = np.asarray(actions)
    n = acts.shape[0]
    rows = np.arange(n)
    adv = np.asarray(adv_scalar, dtype=np.float64)
    if cfg.norm_adv:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    def head(logits: np.ndarray, values: np.ndarray):
        logp_all = nn.log_softmax(logits)
        probs = np.exp(logp_all)
        new_log_probs = logp_all[rows, acts]
        log_ratio = new_log_probs - old_log_probs
        ratio = np.exp(log_ratio)

        pg1 = -adv * ratio
        pg2 = -adv * np.clip(ratio, 1.0 - cfg.clip_coef, 1.0 + cfg.clip_coef)
        pg_loss = np.maximum(pg1, pg2).mean()

        ent = -(probs * logp_all).sum(axis=1)
        entropy = ent.mean()

        err = values - returns
        if cfg.clip_vloss:
            v_clipped = old_values + np.clip(values - old_values, -cfg.clip_coef, cfg.clip_coef)
            v_un = err**2
            v_cl = (v_clipped - returns) ** 2
            take_un = v_un >= v_cl
            v_loss = 0.5 * np.maximum(v_un, v_cl).mean(axis=0).sum()
            dvalues = cfg.vf_coef * np.where(take_un, err, 0.0) / n
        else:
            v_loss = 0.5 * (err**2).mean(axis=0).sum()
            dvalues = cfg.vf_coef * err / n

        loss = pg_loss - cfg.ent_coef * entropy + cfg.vf_coef * v_loss

        take_pg1 = pg1 >= pg2
        d_ratio = np.where(take_pg1, -adv, 0.0) / n
        d_newlp = d_ratio * ratio
        one_hot = np.zeros_like(logits)
        one_hot[rows, acts] = 1.0
        dlogits = d_newlp[:, None] * (one_hot - probs)
        dlogits += (cfg.ent_coef / n) * probs * (logp_all + ent[:, None])

        if stats is not None:
            stats.setdefault("policy_loss", []).append(float(pg_loss))
            stats.setdefault("value_loss", []).append(float(v_loss))
            stats.setdefault("entropy", []).append(float(entropy))
            stats.setdefault("approx_kl", []).append(float(((ratio - 1.0) - log_ratio).mean()))
            stats.setdefault("clip_frac", []).append(
                float((np.abs(ratio - 1.0) > cfg.clip_coef).mean())
            )
        return loss, dlogits, dvalues

    return head


def ppo_update(
    params: Params,
    opt: OptState,
    batch: TrajectoryBatch,
    cfg: PpoConfig,
    rng: np.random.Generator | None = None,
) -> dict:
    """Epochs of shuffled minibatch clipped updates; returns mean statistics."""
    if batch.advantages is None or batch.returns is None:
        raise ValueError("batch is missing advantages/returns; run gae_vector first")
    if rng is None:
        rng = rngutil.rng_from(cfg.seed, rngutil.SHUFFLE)
    n_obj = batch.rewards.shape[2]
    obs = batch.observations.reshape(-1, batch.observations.shape[-1])
    actions = batch.actions.reshape(-1)
    old_log_probs = batch.log_probs.reshape(-1)
    advantages = batch.advantages.reshape(-1, n_obj)
    returns = batch.returns.reshape(-1, n_obj)
    old_values = batch.values[:, :-1].reshape(-1, n_obj)
    total = obs.shape[0]
    mb_size = total // cfg.minibatches

    adv_scalar = scalarize_advantages(advantages, cfg)
    stats: dict = {}
    for _ in range(cfg.update_epochs):
        perm = rng.permutation(total)
        for m in range(cfg.minibatches):
            idx = perm[m * mb_size : (m + 1) * mb_size]
            head = make_ppo_loss_head(
                actions[idx], old_log_probs[idx], adv_scalar[idx],
                returns[idx], old_values[idx], cfg, stats,
            )
            _, g = nn.grad(params, obs[idx], head)
            nn.opt_step(params, g, opt)
    return {k: float(np.mean(v)) for k, v in stats.items()}


def lr_schedule(cfg: PpoConfig, update: int, num_updates: int) -> float:
    """Linear anneal from the configured rate to exactly 0 at the last update."""
    if not cfg.anneal_lr or num_updates <= 1:
        return cfg.learning_rate
    return cfg.learning_rate * (num_updates - update) / (num_updates - 1)


def build_net_spec(obs_dim: int, n_actions: int, n_obj: int, hidden: tuple[int, ...]) -> NetSpec:
    return NetSpec(input_dim=obs_dim, policy_out=n_actions, value_heads=n_obj, hidden_dims=hidden)


def _collect_rollout(params, envs, env_state, cfg, rollout_rng, n_obj):
    """One segment of cfg.num_steps across all envs; returns a TrajectoryBatch."""
    n_env, n_step = cfg.num_envs, cfg.num_steps
    obs_dim = envs[0].obs_dim
    observations = np.zeros((n_env, n_step, obs_dim))
    actions = np.zeros((n_env, n_step), dtype=np.int64)
    log_probs = np.zeros((n_env, n_step))
    rewards = np.zeros((n_env, n_step, n_obj))
    values = np.zeros((n_env, n_step + 1, n_obj))
    dones = np.zeros((n_env, n_step))

    cur_obs = env_state["obs"]
    for t in range(n_step):
        stacked = np.stack(cur_obs)
        logits, vals = nn.forward(params, stacked)
        acts = nn.sample_categorical(rollout_rng, logits)
        logp = nn.log_softmax(logits)[np.arange(n_env), acts]
        observations[:, t] = stacked
        actions[:, t] = acts
        log_probs[:, t] = logp
        values[:, t] = vals
        for i, env in enumerate(envs):
            res = env.step(int(acts[i]))
            rewards[i, t] = res.reward
            dones[i, t] = 1.0 if res.done else 0.0
            if res.done:
                env_state["episodes"][i] += 1
                cur_obs[i] = env.reset(rngutil.subseed(cfg.seed, rngutil.ENV, i, env_state["episodes"][i]))
            else:
                cur_obs[i] = res.obs
    _, boot = nn.forward(params, np.stack(cur_obs))
    values[:, n_step] = boot
    env_state["obs"] = cur_obs
    return TrajectoryBatch(observations, actions, log_probs, rewards, values, dones)


def _eval_policy(params, env_factory, cfg, game_gamma, n_obj, seed_key):
    """Mean discounted return per objective plus mean per-component returns."""
    from .policies import MoppoPolicy

    policy = MoppoPolicy(params)
    ep_returns = np.zeros((cfg.eval_episodes, n_obj))
    comp_returns = np.zeros((cfg.eval_episodes, 4))
    have_components = True
    for ep in range(cfg.eval_episodes):
        env = env_factory()
        obs = env.reset(rngutil.subseed(cfg.seed, rngutil.EVAL, seed_key, ep))
        rng = rngutil.rng_from(cfg.seed, rngutil.EVAL, seed_key, ep, 1)
        policy.begin_episode()
        disc = 1.0
        done = False
        while not done:
            res = env.step(policy.act(obs, rng))
            ep_returns[ep] += disc * res.reward
            comps = res.components
            if comps is None:
                have_components = False
            else:
                c = comps.as_dict()
                comp_returns[ep] += disc * np.array([c["c1"], c["c2"], c["c3"], c["c4"]])
            disc *= game_gamma
            obs = res.obs
            done = res.done
    mean_ret = ep_returns.mean(axis=0)
    mean_comp = comp_returns.mean(axis=0) if have_components else None
    return mean_ret, mean_comp


def train(
    cfg: PpoConfig,
    game: GameSpec,
    scenario=None,
    sim_config=None,
    env_factory=None,
    out_dir: str | Path | None = None,
    checkpoint_name: str = "policy",
    config_hash: str = "",
) -> tuple[PolicyCheckpoint, list[dict]]:
    """Full training loop; returns the checkpoint and the metrics log.

    ``env_factory`` overrides the built-in defence environment (used by the
    toy benchmarks in the test suite).
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
            f"game has {n_obj} objectives but weights have {cfg.n_obj} entries"
        )
    spec = build_net_spec(probe.obs_dim, probe.n_actions, n_obj, cfg.hidden_dims)
    params = nn.init(spec, cfg.seed)
    opt = OptState.for_params(params, cfg.learning_rate, cfg.max_grad_norm)
    shuffle_rng = rngutil.rng_from(cfg.seed, rngutil.SHUFFLE)
    rollout_rng = rngutil.rng_from(cfg.seed, rngutil.ROLLOUT)

    envs = [env_factory() for _ in range(cfg.num_envs)]
    env_state = {
        "obs": [
            env.reset(rngutil.subseed(cfg.seed, rngutil.ENV, i, 0)) for i, env in enumerate(envs)
        ],
        "episodes": [0] * cfg.num_envs,
    }

    num_updates = max(1, math.ceil(cfg.total_timesteps / cfg.batch_size))
    log: list[dict] = []
    global_step = 0
    next_eval = cfg.eval_freq
    w = cfg.weights.array()

    for update in range(1, num_updates + 1):
        lr = lr_schedule(cfg, update, num_updates)
        opt.learning_rate = lr
        batch = _collect_rollout(params, envs, env_state, cfg, rollout_rng, n_obj)
        batch.advantages, batch.returns = gae_vector(
            batch.rewards, batch.values, batch.dones, cfg.gamma, cfg.gae_lambda
        )
        stats = ppo_update(params, opt, batch, cfg, shuffle_rng)
        global_step += cfg.batch_size

        if global_step >= next_eval or update == num_updates:
            mean_ret, mean_comp = _eval_policy(params, env_factory, cfg, game.gamma, n_obj, update)
            entry = {
                "global_step": global_step,
                "update": update,
                "learning_rate": lr,
                "mean_return": [float(v) for v in mean_ret],
                "summed_return": float(mean_ret.sum()),
                "scalarized_return": float(w @ mean_ret),
            }
            if mean_comp is not None:
                entry["mean_components"] = [float(v) for v in mean_comp]
            entry.update(stats)
            log.append(entry)
            while next_eval <= global_step:
                next_eval += cfg.eval_freq

    ckpt = PolicyCheckpoint(
        spec=spec,
        params=params.vec.copy(),
        trainer="moppo",
        n_obj=n_obj,
        seed=cfg.seed,
        weights=list(cfg.weights.w),
        config_hash=config_hash,
        extra={
            "weighting_strategy": cfg.weighting_strategy.value,
            "game": game.game.value,
            "gamma": game.gamma,
            "episode_length": game.episode_length,
        },
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        nn.save_checkpoint(ckpt, out / checkpoint_name)
        write_jsonl(out / f"{checkpoint_name}.metrics.jsonl", log)
    return ckpt, log


def default_sweep_weights() -> list[WeightVector]:
    """Eleven weightings stepping the green objective from 0.0 to 1.0."""
    out = []
    for k in range(11):
        wg = k / 10.0
        out.append(WeightVector.of([1.0 - wg, wg]))
    return out


def weight_sweep(
    cfg: PpoConfig,
    game: GameSpec,
    scenario=None,
    sim_config=None,
    weights: list[WeightVector] | None = None,
    out_dir: str | Path | None = None,
    eval_episodes: int = 200,
    eval_seed: int = 10_000,
    env_factory=None,
) -> tuple[FrontEstimate, list[PolicyCheckpoint]]:
    """Train one policy per weighting and assemble the evaluated front.

    Points are tagged with the green-objective weight and left un-pruned (the
    sweep reports every trained policy). A failed member run aborts the sweep
    after writing the partial results.
    """
    from . import evalharness

    if game.n_obj != 2:
        raise ConfigurationError("weight sweep is defined for two-objective games")
    if weights is None:
        weights = default_sweep_weights()
    if not weights:
        raise ConfigurationError("weight list is empty")

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    points: list[ParetoPoint] = []
    rows: list[dict] = []
    ckpts: list[PolicyCheckpoint] = []
    try:
        for w in weights:
            wg = w.w[1]
            member = replace(cfg, weights=w)
            name = f"policy_w{wg:.1f}"
            ckpt, _ = train(
                member, game, scenario=scenario, sim_config=sim_config,
                env_factory=env_factory, out_dir=out, checkpoint_name=name,
            )
            summary = evalharness.evaluate(
                ckpt, game, scenario=scenario, sim_config=sim_config,
                n_episodes=eval_episodes, seed=eval_seed, env_factory=env_factory,
                tag=f"w_green={wg:.1f}",
            )
            tag = f"w_green={wg:.1f}|{cfg.weighting_strategy.value}"
            points.append(ParetoPoint.of(summary.mean, tag=tag))
            rows.append(
                {
                    "w_green": wg,
                    "obj0_mean": summary.mean[0],
                    "obj0_std": summary.std[0],
                    "obj1_mean": summary.mean[1],
                    "obj1_std": summary.std[1],
                    "n_episodes": summary.n_episodes,
                    "strategy": cfg.weighting_strategy.value,
                    "tag": tag,
                }
            )
            ckpts.append(ckpt)
    finally:
        if out is not None and rows:
            evalharness.write_sweep_csv(out / "front.csv", rows)
    return FrontEstimate(points), ckpts
