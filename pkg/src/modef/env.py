"""Vector-reward episodic wrapper around the network simulation.

Each step runs blue action → red action → green sample, then assembles the
four reward components into the objective vector of the configured game:

* Game A: one objective, the summed defence penalty (components 1+2+3).
* Game B: [red access penalty, disruption penalty (impact + restore)].
* Game C: [summed defence penalty, green port count].

Components are always computed from the post-step state and returned
alongside the reward so any game's log can be re-decomposed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import simnet
from .errors import UsageError
from .serialize import jsonl_line
from .simnet import (
    BlueAction,
    BlueKind,
    GreenOutcome,
    NetworkState,
    RedLevel,
    RedOutcome,
    Scenario,
    SimConfig,
    Subnet,
    USER0,
)

ACCESS_PENALTY_LIGHT = 0.1   # user and operational hosts
ACCESS_PENALTY_HEAVY = 1.0   # enterprise servers and the operational server
IMPACT_PENALTY = 10.0
RESTORE_PENALTY = 1.0

# Per-host observation block: scan flag, exploit flag, known-level one-hot(4),
# normalized open ports.
HOST_OBS_WIDTH = 7


class Game(Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def n_obj(self) -> int:
        return 1 if self == Game.A else 2


@dataclass(frozen=True)
class GameSpec:
    game: Game
    gamma: float = 0.99
    episode_length: int = 512

    @property
    def n_obj(self) -> int:
        return self.game.n_obj


@dataclass(frozen=True)
class RewardComponents:
    red_access: float    # component 1, <= 0
    red_impact: float    # component 2, 0 or -10
    restore_cost: float  # component 3, 0 or -1
    green_ports: float   # component 4, >= 0

    def as_dict(self) -> dict:
        return {
            "c1": self.red_access,
            "c2": self.red_impact,
            "c3": self.restore_cost,
            "c4": self.green_ports,
        }


def red_access_penalty(state: NetworkState) -> float:
    light = heavy = 0
    for hid, hs in state.hosts.items():
        if hs.red != RedLevel.PRIVILEGED or hid == USER0:
            continue
        if hid.subnet == Subnet.ENTERPRISE or hid.is_op_server:
            heavy += 1
        else:
            light += 1
    penalty = ACCESS_PENALTY_LIGHT * light + ACCESS_PENALTY_HEAVY * heavy
    return -penalty if penalty else 0.0


def compute_components(
    state: NetworkState,
    blue: BlueAction,
    red: RedOutcome,
    green: GreenOutcome,
) -> RewardComponents:
    return RewardComponents(
        red_access=red_access_penalty(state),
        red_impact=-IMPACT_PENALTY if red.impact_fired else 0.0,
        restore_cost=-RESTORE_PENALTY if blue.kind == BlueKind.RESTORE else 0.0,
        green_ports=float(green.ports_accessed),
    )


def assemble_objectives(c: RewardComponents, game: GameSpec | Game) -> np.ndarray:
    """Objective vector for the game; sum(Game B) == Game A == Game C[0] bitwise."""
    g = game.game if isinstance(game, GameSpec) else game
    disruption = c.red_impact + c.restore_cost
    defence = c.red_access + disruption
    if g == Game.A:
        return np.array([defence], dtype=np.float64)
    if g == Game.B:
        return np.array([c.red_access, disruption], dtype=np.float64)
    return np.array([defence, c.green_ports], dtype=np.float64)


# --- observation and action coding ------------------------------------------

def encode_observation(state: NetworkState) -> np.ndarray:
    """Fixed-order per-host blocks, every entry in [0, 1]."""
    max_ports = state.config.max_ports
    out = np.zeros(HOST_OBS_WIDTH * len(state.defendable), dtype=np.float64)
    for i, hid in enumerate(state.defendable):
        hs = state.hosts[hid]
        base = i * HOST_OBS_WIDTH
        out[base] = 1.0 if hs.scan_flag else 0.0
        out[base + 1] = 1.0 if hs.exploit_flag else 0.0
        out[base + 2 + int(hs.known)] = 1.0
        out[base + 6] = hs.ports_open / max_ports
    return out


BLUE_KINDS = (BlueKind.ANALYSE, BlueKind.REMOVE, BlueKind.RESTORE, BlueKind.START_SERVICE)


def action_table(scenario: Scenario) -> tuple[BlueAction, ...]:
    """Discrete action list: Sleep, then 4 actions per defendable host."""
    hosts = [h for h in simnet.roster(scenario) if h != USER0]
    actions = [simnet.SLEEP]
    for h in hosts:
        for kind in BLUE_KINDS:
            actions.append(BlueAction(kind, h))
    return tuple(actions)


@dataclass
class StepResult:
    obs: np.ndarray
    reward: np.ndarray
    done: bool
    components: RewardComponents

    def __iter__(self):
        return iter((self.obs, self.reward, self.done, self.components))


class DefenceEnv:
    """Episodic environment with a discrete blue action space."""

    def __init__(self, spec: GameSpec, sim: SimConfig | None = None):
        self.spec = spec
        self.sim = sim if sim is not None else SimConfig()
        self.actions = action_table(self.sim.scenario)
        self.state: NetworkState | None = None
        self._done = True
        # validation up front rather than at the first green draw
        probe = simnet.build_topology(self.sim.scenario, 0, self.sim)
        self.sim.resolved_subgroup(probe.roster)
        self.obs_dim = HOST_OBS_WIDTH * len(probe.defendable)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_obj(self) -> int:
        return self.spec.n_obj

    @property
    def episode_length(self) -> int:
        return self.spec.episode_length

    def reset(self, seed: int) -> np.ndarray:
        self.state = simnet.build_topology(self.sim.scenario, seed, self.sim)
        self._done = False
        return encode_observation(self.state)

    def step(self, action: int | BlueAction) -> StepResult:
        if self.state is None or self._done:
            raise UsageError("step() called on a finished episode; call reset()")
        blue = self.actions[action] if isinstance(action, (int, np.integer)) else action
        state = self.state
        simnet.clear_step_flags(state)
        simnet.blue_apply(state, blue)
        red = simnet.red_step(state)
        green = simnet.green_step(state)
        state.t += 1
        comps = compute_components(state, blue, red, green)
        reward = assemble_objectives(comps, self.spec)
        self._done = state.t >= self.spec.episode_length
        return StepResult(encode_observation(state), reward, self._done, comps)


def step_record(t: int, action_index: int, reward: np.ndarray, comps: RewardComponents, done: bool) -> dict:
    return {
        "t": t,
        "action_index": int(action_index),
        "reward": [float(v) for v in reward],
        "components": comps.as_dict(),
        "done": done,
    }


class EpisodeLogger:
    """Writes one JSONL record per step (six-digit decimal rendering)."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")
        self._t = 0

    def log(self, action_index: int, result: StepResult) -> None:
        self._t += 1
        rec = step_record(self._t, action_index, result.reward, result.components, result.done)
        self._fh.write(jsonl_line(rec) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
