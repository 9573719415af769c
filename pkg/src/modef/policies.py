"""Acting policies shared by the evaluators, the steering server and the CLI.

A policy exposes ``begin_episode()``, ``act(obs, rng)`` and ``observe(reward)``.
The caller owns the sampling generator and the environment; the policy owns
only per-episode conditioning state (the desired-return command for
return-conditioned nets).
"""

from __future__ import annotations

import numpy as np

from . import nn
from .nn import PolicyCheckpoint


def conditioned_obs(
    obs: np.ndarray,
    desired_return: np.ndarray,
    desired_horizon: float,
    scaling: np.ndarray,
) -> np.ndarray:
    """Observation with the scaled (return, horizon) prompt appended."""
    scaling = np.asarray(scaling, dtype=np.float64)
    cond = np.concatenate(
        [np.asarray(desired_return, dtype=np.float64) * scaling[:-1],
         [desired_horizon * scaling[-1]]]
    )
    return np.concatenate([np.asarray(obs, dtype=np.float64), cond])


class MoppoPolicy:
    """Categorical policy over blue actions; samples or takes the argmax."""

    def __init__(self, params: nn.Params, mode: str = "sample", tag: object = None):
        if mode not in ("sample", "greedy"):
            raise ValueError(f"unknown acting mode {mode!r}")
        self.params = params
        self.mode = mode
        self.tag = tag

    def begin_episode(self) -> None:
        pass

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> int:
        logits, _ = nn.forward(self.params, obs)
        if self.mode == "greedy":
            return int(np.argmax(logits))
        return int(nn.sample_categorical(rng, logits)[0])

    def observe(self, reward: np.ndarray) -> None:
        pass


class PcnPolicy:
    """Return-conditioned policy prompted with a target return and horizon."""

    def __init__(
        self,
        params: nn.Params,
        scaling: np.ndarray,
        desired_return: np.ndarray,
        desired_horizon: int,
        mode: str = "greedy",
        tag: object = None,
    ):
        if mode not in ("sample", "greedy"):
            raise ValueError(f"unknown acting mode {mode!r}")
        self.params = params
        self.scaling = np.asarray(scaling, dtype=np.float64)
        self.initial_return = np.asarray(desired_return, dtype=np.float64).copy()
        self.initial_horizon = int(desired_horizon)
        if self.initial_horizon < 1:
            raise ValueError("desired horizon must be >= 1")
        self.mode = mode
        self.tag = tag
        self.begin_episode()

    def begin_episode(self) -> None:
        self.desired_return = self.initial_return.copy()
        self.desired_horizon = self.initial_horizon

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> int:
        x = conditioned_obs(obs, self.desired_return, self.desired_horizon, self.scaling)
        logits, _ = nn.forward(self.params, x)
        if self.mode == "greedy":
            return int(np.argmax(logits))
        return int(nn.sample_categorical(rng, logits)[0])

    def observe(self, reward: np.ndarray) -> None:
        self.desired_return = self.desired_return - np.asarray(reward, dtype=np.float64)
        self.desired_horizon = max(1, self.desired_horizon - 1)


def policy_from_checkpoint(ckpt: PolicyCheckpoint, mode: str | None = None, tag: object = None):
    """Build the right policy wrapper for a stored checkpoint."""
    params = ckpt.to_params()
    if ckpt.trainer == "moppo":
        return MoppoPolicy(params, mode=mode or "sample", tag=tag)
    if ckpt.trainer == "pcn":
        target = ckpt.extra.get("default_target")
        horizon = ckpt.extra.get("default_horizon", 512)
        if target is None:
            target = [0.0] * ckpt.n_obj
        return PcnPolicy(
            params,
            scaling=np.asarray(ckpt.scaling, dtype=np.float64),
            desired_return=np.asarray(target, dtype=np.float64),
            desired_horizon=int(horizon),
            mode=mode or "greedy",
            tag=tag,
        )
    raise ValueError(f"unknown trainer kind {ckpt.trainer!r} in checkpoint")
