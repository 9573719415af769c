"""Live rollout sessions over WebSocket with mid-episode steering.

One session per connection. The session advances its episode at a
configurable tick rate (0 = manual stepping) and streams a state frame after
every step. Steering commands select a different portfolio policy (nearest
weight vector) or a return-conditioned prompt; they are acknowledged with the
step at which they take effect.

Frame/step convention: frame ``t`` reports the state after ``t`` completed
steps, and the policy that will act on step ``t`` is latched when the frame
is emitted. A command processed while the session sits at frame ``t``
therefore takes effect at step ``t + 1`` — this makes a scripted
"reprioritize at step 256" session replay bit-identically to an offline
switch rollout at t_switch = 256.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Game, GameSpec
from .evalharness import RolloutStepper
from .nn import PolicyCheckpoint, load_checkpoint
from .policies import MoppoPolicy, PcnPolicy, policy_from_checkpoint
from .serialize import jsonl_line
from .simnet import SimConfig


@dataclass
class PortfolioEntry:
    weights: tuple[float, ...]
    checkpoint: PolicyCheckpoint
    tag: str


@dataclass
class PolicyPortfolio:
    entries: list[PortfolioEntry] = field(default_factory=list)
    pcn: PolicyCheckpoint | None = None

    def __post_init__(self):
        if not self.entries and self.pcn is None:
            raise ValueError("portfolio is empty")
        tags = [e.tag for e in self.entries]
        if len(set(tags)) != len(tags):
            raise ValueError(f"duplicate portfolio tags {tags}")

    @property
    def weight_dim(self) -> int:
        return len(self.entries[0].weights) if self.entries else 0

    def nearest(self, w) -> PortfolioEntry:
        """Entry with minimum Euclidean distance; ties go to the lower index."""
        if not self.entries:
            raise ValueError("portfolio has no weight-tagged policies")
        w = np.asarray(w, dtype=np.float64)
        dists = [float(np.linalg.norm(np.array(e.weights) - w)) for e in self.entries]
        return self.entries[int(np.argmin(dists))]

    @staticmethod
    def from_dir(path) -> "PolicyPortfolio":
        """Collect every checkpoint under a directory into a portfolio."""
        base = Path(path)
        entries = []
        pcn = None
        for meta in sorted(base.glob("*.meta.json")):
            ckpt = load_checkpoint(meta)
            if ckpt.trainer == "moppo" and ckpt.weights is not None:
                entries.append(
                    PortfolioEntry(
                        weights=tuple(ckpt.weights),
                        checkpoint=ckpt,
                        tag=meta.name[: -len(".meta.json")],
                    )
                )
            elif ckpt.trainer == "pcn":
                pcn = ckpt
        return PolicyPortfolio(entries=entries, pcn=pcn)


@dataclass
class ServeDefaults:
    game: GameSpec = field(default_factory=lambda: GameSpec(Game.C))
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    steps_per_sec: float = 4.0
    initial_weights: tuple[float, ...] = (0.5, 0.5)


def _policy_descriptor(policy, tag, weights) -> dict:
    if isinstance(policy, PcnPolicy):
        return {
            "kind": "pcn",
            "return": [float(v) for v in policy.desired_return],
            "horizon": int(policy.desired_horizon),
            "tag": str(tag),
        }
    return {"kind": "weights", "w": [float(v) for v in weights], "tag": str(tag)}


class SteerSession:
    """Sequential episode loop owned by one connection."""

    def __init__(self, portfolio: PolicyPortfolio, defaults: ServeDefaults,
                 record_dir=None, session_id: int = 0):
        self.portfolio = portfolio
        self.defaults = defaults
        self.record_dir = Path(record_dir) if record_dir is not None else None
        self.session_id = session_id
        self.paused = False
        self.steps_per_sec = defaults.steps_per_sec
        self.episode_idx = 0
        if portfolio.entries:
            entry = portfolio.nearest(defaults.initial_weights)
            self._pending = (
                MoppoPolicy(entry.checkpoint.to_params(), tag=entry.tag), entry.tag, entry.weights,
            )
        else:
            pol = policy_from_checkpoint(portfolio.pcn, tag="pcn")
            self._pending = (pol, "pcn", None)
        self._reset(defaults.seed)

    def _reset(self, seed: int) -> None:
        self.seed = seed
        policy, tag, weights = self._pending
        self.stepper = RolloutStepper(
            policy, self.defaults.game, seed,
            sim_config=self.defaults.sim, tag=tag,
        )
        self._active_tag = tag
        self._active_weights = weights
        self._recorded = False

    @property
    def t(self) -> int:
        return self.stepper.t

    @property
    def done(self) -> bool:
        return self.stepper.done

    def latch(self) -> None:
        """Adopt the pending policy for the next step (runs at frame emission)."""
        policy, tag, weights = self._pending
        if policy is not self.stepper.policy:
            self.stepper.set_policy(policy, tag)
            self._active_tag = tag
            self._active_weights = weights

    def state_frame(self, last_entry: dict | None = None) -> dict:
        env_state = self.stepper.env.state
        hosts = []
        for hid in env_state.defendable:
            hs = env_state.hosts[hid]
            hosts.append(
                {
                    "id": str(hid),
                    "known_level": {0: "None", 1: "Unknown", 2: "UserAccess", 3: "Privileged"}[
                        int(hs.known)
                    ],
                    "ports": int(hs.ports_open),
                    "scan": bool(hs.scan_flag),
                    "exploit": bool(hs.exploit_flag),
                }
            )
        reward = last_entry["reward"] if last_entry else [0.0] * self.defaults.game.n_obj
        return {
            "type": "state",
            "t": self.t,
            "cum_return": [float(v) for v in self.stepper.cum],
            "reward": reward,
            "hosts": hosts,
            "active_policy": _policy_descriptor(
                self.stepper.policy, self._active_tag, self._active_weights
            ),
        }

    def step(self) -> tuple[dict, dict | None]:
        """One environment step; returns (state frame, episode_end frame | None)."""
        entry = self.stepper.step()
        self.latch()
        frame = self.state_frame(entry)
        end = None
        if self.stepper.done:
            self._write_record()
            end = {
                "type": "episode_end",
                "summary": {
                    "t": self.t,
                    "seed": self.seed,
                    "cum_return": [float(v) for v in self.stepper.cum],
                },
            }
        return frame, end

    def _write_record(self) -> None:
        if self.record_dir is None or self._recorded:
            return
        self.record_dir.mkdir(parents=True, exist_ok=True)
        path = self.record_dir / f"session{self.session_id}_ep{self.episode_idx}.jsonl"
        path.write_text(
            "".join(line + "\n" for line in self.stepper.record.lines()), encoding="utf-8"
        )
        self._recorded = True

    # --- command handling ----------------------------------------------------

    def apply(self, msg: dict) -> dict | None:
        """Apply one protocol message; returns the reply frame (ack/error/state)."""
        kind = msg.get("type")
        if kind == "set_weights":
            return self._set_weights(msg)
        if kind == "set_target":
            return self._set_target(msg)
        if kind == "pause":
            self.paused = True
            return None
        if kind == "resume":
            self.paused = False
            return None
        if kind == "reset":
            seed = msg.get("seed", self.seed)
            if not isinstance(seed, int):
                return {"type": "error", "detail": f"reset seed must be an integer, got {seed!r}"}
            self.episode_idx += 1
            self._reset(seed)
            return self.state_frame()
        if kind == "set_speed":
            speed = msg.get("steps_per_sec")
            if not isinstance(speed, (int, float)) or speed < 0:
                return {"type": "error", "detail": f"bad steps_per_sec {speed!r}"}
            self.steps_per_sec = float(speed)
            return None
        if kind == "step":
            return None  # handled by the session loop
        return {"type": "error", "detail": f"unknown message type {kind!r}"}

    def _ack(self, msg: dict) -> dict:
        return {"type": "ack", "cmd_id": msg.get("cmd_id"), "effective_step": self.t + 1}

    def _set_weights(self, msg: dict) -> dict:
        w = msg.get("w")
        if (
            not isinstance(w, list)
            or len(w) != self.portfolio.weight_dim
            or not all(isinstance(v, (int, float)) for v in w)
        ):
            return {
                "type": "error",
                "detail": f"set_weights expects {self.portfolio.weight_dim} numeric weights",
            }
        entry = self.portfolio.nearest(w)
        self._pending = (
            MoppoPolicy(entry.checkpoint.to_params(), tag=entry.tag), entry.tag, entry.weights,
        )
        return self._ack(msg)

    def _set_target(self, msg: dict) -> dict:
        if self.portfolio.pcn is None:
            return {"type": "error", "detail": "portfolio has no return-conditioned policy"}
        ret = msg.get("return")
        horizon = msg.get("horizon")
        n_obj = self.defaults.game.n_obj
        if not isinstance(ret, list) or len(ret) != n_obj:
            return {"type": "error", "detail": f"set_target expects a {n_obj}-entry return"}
        if not isinstance(horizon, int) or horizon < 1:
            return {"type": "error", "detail": f"horizon must be a positive integer, got {horizon!r}"}
        ckpt = self.portfolio.pcn
        policy = PcnPolicy(
            ckpt.to_params(),
            scaling=np.asarray(ckpt.scaling, dtype=np.float64),
            desired_return=np.asarray(ret, dtype=np.float64),
            desired_horizon=horizon,
            mode="greedy",
            tag="pcn",
        )
        self._pending = (policy, "pcn", None)
        return self._ack(msg)


class SteerServer:
    """WebSocket front end; one SteerSession per connection."""

    def __init__(self, portfolio: PolicyPortfolio, defaults: ServeDefaults | None = None,
                 record_dir=None):
        self.portfolio = portfolio
        self.defaults = defaults if defaults is not None else ServeDefaults()
        self.record_dir = record_dir
        self._server = None
        self._session_counter = 0

    async def _handler(self, ws) -> None:
        session = SteerSession(
            self.portfolio, self.defaults, self.record_dir, self._session_counter
        )
        self._session_counter += 1
        await ws.send(jsonl_line(session.state_frame()))
        queue: asyncio.Queue = asyncio.Queue()

        async def reader():
            try:
                async for raw in ws:
                    await queue.put(raw)
            except Exception:
                pass
            finally:
                await queue.put(None)

        reader_task = asyncio.create_task(reader())
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        try:
            while True:
                running = not session.paused and not session.done and session.steps_per_sec > 0
                if running:
                    timeout = max(0.0, next_tick - loop.time())
                    try:
                        raw = await asyncio.wait_for(queue.get(), timeout)
                    except asyncio.TimeoutError:
                        raw = "__tick__"
                else:
                    raw = await queue.get()
                if raw is None:
                    break
                if raw == "__tick__":
                    frame, end = session.step()
                    await ws.send(jsonl_line(frame))
                    if end:
                        await ws.send(jsonl_line(end))
                    next_tick = loop.time() + 1.0 / session.steps_per_sec
                    continue
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as e:
                    await ws.send(jsonl_line({"type": "error", "detail": f"bad message: {e}"}))
                    continue
                reply = session.apply(msg)
                if reply is not None:
                    await ws.send(jsonl_line(reply))
                if msg.get("type") == "step":
                    if session.done:
                        await ws.send(jsonl_line(
                            {"type": "error", "detail": "episode finished; send reset"}
                        ))
                    else:
                        frame, end = session.step()
                        await ws.send(jsonl_line(frame))
                        if end:
                            await ws.send(jsonl_line(end))
                if msg.get("type") in ("resume", "set_speed"):
                    next_tick = loop.time()
        finally:
            reader_task.cancel()

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        from websockets.asyncio.server import serve as ws_serve

        self._server = await ws_serve(self._handler, host, port)
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None


def serve(portfolio: PolicyPortfolio, bind_address: str,
          defaults: ServeDefaults | None = None, record_dir=None) -> None:
    """Blocking entry point: serve sessions until interrupted."""
    host, _, port = bind_address.rpartition(":")
    server = SteerServer(portfolio, defaults, record_dir)

    async def main():
        actual = await server.start(host or "127.0.0.1", int(port))
        print(f"steering service listening on {host or '127.0.0.1'}:{actual}")
        await asyncio.Future()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
