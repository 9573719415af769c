import asyncio
import json

import numpy as np
import pytest

from modef import nn
from modef.env import Game, GameSpec
from modef.evalharness import switch_rollout
from modef.moppo import build_net_spec
from modef.nn import PolicyCheckpoint
from modef.policies import MoppoPolicy
from modef.simnet import RedMode, Scenario, SimConfig
from modef.steersvc import (
    PolicyPortfolio,
    PortfolioEntry,
    ServeDefaults,
    SteerServer,
    SteerSession,
)

GAME = GameSpec(Game.C, episode_length=32)
SIM = SimConfig(scenario=Scenario.CAGE2_ORIGINAL, red_mode=RedMode.BLINE)


def make_ckpt(seed, weights, obs_dim=63, n_actions=37):
    spec = build_net_spec(obs_dim, n_actions, 2, (16, 16))
    return PolicyCheckpoint(
        spec=spec, params=nn.init(spec, seed).vec, trainer="moppo", n_obj=2,
        seed=seed, weights=list(weights),
    )


def make_pcn_ckpt(seed, obs_dim=63, n_actions=37):
    spec = nn.NetSpec(input_dim=obs_dim + 3, policy_out=n_actions, value_heads=0,
                      hidden_dims=(16, 16))
    return PolicyCheckpoint(
        spec=spec, params=nn.init(spec, seed).vec, trainer="pcn", n_obj=2, seed=seed,
        scaling=[1.0, 1.0, 0.1], extra={"default_target": [0.0, 100.0], "default_horizon": 32},
    )


@pytest.fixture
def portfolio():
    entries = [
        PortfolioEntry(weights=(1.0, 0.0), checkpoint=make_ckpt(0, (1.0, 0.0)), tag="w0.0"),
        PortfolioEntry(weights=(0.5, 0.5), checkpoint=make_ckpt(1, (0.5, 0.5)), tag="w0.5"),
        PortfolioEntry(weights=(0.0, 1.0), checkpoint=make_ckpt(2, (0.0, 1.0)), tag="w1.0"),
    ]
    return PolicyPortfolio(entries=entries, pcn=make_pcn_ckpt(3))


@pytest.fixture
def defaults():
    return ServeDefaults(game=GAME, sim=SIM, seed=7, steps_per_sec=0.0,
                         initial_weights=(1.0, 0.0))


class TestPortfolio:
    def test_nearest_picks_matching_tag(self, portfolio):
        assert portfolio.nearest([0.4, 0.6]).tag == "w0.5"
        assert portfolio.nearest([0.05, 0.95]).tag == "w1.0"

    def test_nearest_tie_prefers_lower_index(self, portfolio):
        assert portfolio.nearest([0.75, 0.25]).tag == "w0.0"

    def test_round_trip_through_directory(self, tmp_path, portfolio):
        for e in portfolio.entries:
            nn.save_checkpoint(e.checkpoint, tmp_path / e.tag)
        nn.save_checkpoint(portfolio.pcn, tmp_path / "pcn")
        back = PolicyPortfolio.from_dir(tmp_path)
        assert {e.tag for e in back.entries} == {"w0.0", "w0.5", "w1.0"}
        assert back.pcn is not None

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            PolicyPortfolio(entries=[])


class TestSessionUnit:
    def test_initial_frame_shape(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        frame = session.state_frame()
        assert frame["type"] == "state"
        assert frame["t"] == 0
        assert frame["cum_return"] == [0.0, 0.0]
        assert len(frame["hosts"]) == 9
        assert all(h["known_level"] == "Unknown" for h in frame["hosts"])
        assert frame["active_policy"]["kind"] == "weights"
        assert frame["active_policy"]["tag"] == "w0.0"

    def test_set_weights_ack_effective_next_step(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        for _ in range(5):
            session.step()
        reply = session.apply({"type": "set_weights", "cmd_id": 3, "w": [0.4, 0.6]})
        assert reply == {"type": "ack", "cmd_id": 3, "effective_step": 6}
        frame, _ = session.step()  # step 5 still runs under the old policy
        assert frame["active_policy"]["tag"] == "w0.5"

    def test_set_weights_wrong_length_rejected(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        reply = session.apply({"type": "set_weights", "cmd_id": 1, "w": [0.4]})
        assert reply["type"] == "error"
        assert session.state_frame()["active_policy"]["tag"] == "w0.0"

    def test_set_target_validation(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        bad = session.apply({"type": "set_target", "cmd_id": 2, "return": [0.0, 1.0], "horizon": 0})
        assert bad["type"] == "error"
        ok = session.apply({"type": "set_target", "cmd_id": 3, "return": [0.0, 1.0], "horizon": 16})
        assert ok["type"] == "ack"
        session.step()
        assert session.state_frame()["active_policy"]["kind"] == "pcn"

    def test_unknown_message(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        reply = session.apply({"type": "florble"})
        assert reply["type"] == "error"

    def test_cum_return_is_prefix_sum(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        total = np.zeros(2)
        for _ in range(10):
            frame, _ = session.step()
            total = total + np.array(frame["reward"])
            assert frame["cum_return"] == [float(v) for v in total]

    def test_reset_starts_fresh_episode(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        for _ in range(4):
            session.step()
        frame = session.apply({"type": "reset", "seed": 99})
        assert frame["type"] == "state" and frame["t"] == 0
        assert session.seed == 99

    def test_episode_end_frame(self, portfolio, defaults):
        session = SteerSession(portfolio, defaults)
        end = None
        for _ in range(GAME.episode_length):
            _, end = session.step()
        assert end is not None
        assert end["summary"]["t"] == 32


async def ws_session(port):
    from websockets.asyncio.client import connect

    return await connect(f"ws://127.0.0.1:{port}")


async def recv_json(ws):
    return json.loads(await asyncio.wait_for(ws.recv(), timeout=10))


class TestServer:
    def run(self, coro):
        asyncio.run(coro)

    def test_first_frame_is_snapshot(self, portfolio, defaults):
        async def main():
            server = SteerServer(portfolio, defaults)
            port = await server.start()
            ws = await ws_session(port)
            frame = await recv_json(ws)
            assert frame["type"] == "state" and frame["t"] == 0
            await ws.close()
            await server.stop()

        self.run(main())

    def test_manual_stepping_and_error_frames(self, portfolio, defaults):
        async def main():
            server = SteerServer(portfolio, defaults)
            port = await server.start()
            ws = await ws_session(port)
            await recv_json(ws)
            await ws.send(json.dumps({"type": "step"}))
            frame = await recv_json(ws)
            assert frame["t"] == 1
            await ws.send("not json")
            err = await recv_json(ws)
            assert err["type"] == "error"
            await ws.send(json.dumps({"type": "step"}))
            frame = await recv_json(ws)
            assert frame["t"] == 2  # session survived the bad message
            await ws.close()
            await server.stop()

        self.run(main())

    def test_autonomous_advance_at_tick_rate(self, portfolio):
        defaults = ServeDefaults(game=GAME, sim=SIM, seed=3, steps_per_sec=200.0,
                                 initial_weights=(1.0, 0.0))

        async def main():
            server = SteerServer(portfolio, defaults)
            port = await server.start()
            ws = await ws_session(port)
            first = await recv_json(ws)
            assert first["t"] == 0
            seen = [first]
            while len(seen) < 5:
                msg = await recv_json(ws)
                if msg["type"] == "state":
                    seen.append(msg)
            assert [f["t"] for f in seen] == [0, 1, 2, 3, 4]
            await ws.close()
            await server.stop()

        self.run(main())

    def test_scripted_switch_matches_offline_rollout(self, portfolio, defaults, tmp_path):
        t_switch = 16

        async def main():
            server = SteerServer(portfolio, defaults, record_dir=tmp_path)
            port = await server.start()
            ws = await ws_session(port)
            await recv_json(ws)
            for _ in range(t_switch):
                await ws.send(json.dumps({"type": "step"}))
                frame = await recv_json(ws)
            assert frame["t"] == t_switch
            await ws.send(json.dumps({"type": "set_weights", "cmd_id": 1, "w": [0.0, 1.0]}))
            ack = await recv_json(ws)
            assert ack == {"type": "ack", "cmd_id": 1, "effective_step": t_switch + 1}
            for _ in range(GAME.episode_length - t_switch):
                await ws.send(json.dumps({"type": "step"}))
                frame = await recv_json(ws)
                if frame["type"] != "state":
                    frame = await recv_json(ws)
            end = await recv_json(ws)
            assert end["type"] == "episode_end"
            await ws.close()
            await server.stop()

        self.run(main())
        recorded = (tmp_path / "session0_ep0.jsonl").read_text().splitlines()

        # the command is processed at frame t=16, so it takes effect at step 17:
        # policy a acts on steps 0..16 inclusive, i.e. t_switch = 17 offline
        a = MoppoPolicy(portfolio.entries[0].checkpoint.to_params(), tag="w0.0")
        b = MoppoPolicy(portfolio.entries[2].checkpoint.to_params(), tag="w1.0")
        offline = switch_rollout(a, b, t_switch + 1, GAME, seed=defaults.seed, sim_config=SIM,
                                 tag_a="w0.0", tag_b="w1.0")
        assert recorded == offline.lines()

    def test_set_weights_at_255_effective_256_full_episode(self, portfolio, tmp_path):
        game = GameSpec(Game.C, episode_length=512)
        defaults = ServeDefaults(game=game, sim=SIM, seed=11, steps_per_sec=0.0,
                                 initial_weights=(1.0, 0.0))

        async def main():
            server = SteerServer(portfolio, defaults, record_dir=tmp_path)
            port = await server.start()
            ws = await ws_session(port)
            await recv_json(ws)
            for _ in range(255):
                await ws.send(json.dumps({"type": "step"}))
                await recv_json(ws)
            await ws.send(json.dumps({"type": "set_weights", "cmd_id": 9, "w": [0.0, 1.0]}))
            ack = await recv_json(ws)
            assert ack["effective_step"] == 256
            for _ in range(257):
                await ws.send(json.dumps({"type": "step"}))
                frame = await recv_json(ws)
                if frame["type"] != "state":
                    break
            await ws.close()
            await server.stop()

        self.run(main())
        recorded = (tmp_path / "session0_ep0.jsonl").read_text().splitlines()
        a = MoppoPolicy(portfolio.entries[0].checkpoint.to_params(), tag="w0.0")
        b = MoppoPolicy(portfolio.entries[2].checkpoint.to_params(), tag="w1.0")
        offline = switch_rollout(a, b, 256, game, seed=11, sim_config=SIM,
                                 tag_a="w0.0", tag_b="w1.0")
        assert recorded == offline.lines()
        timeline = offline.policy_timeline()
        assert timeline == ["w0.0"] * 256 + ["w1.0"] * 256
