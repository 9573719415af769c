import pytest

from modef.env import DefenceEnv, Game, GameSpec
from modef.simnet import RedMode, Scenario, SimConfig


@pytest.fixture
def modified_state():
    from modef.simnet import build_topology

    return build_topology(Scenario.MODIFIED_9U6E, 0)


@pytest.fixture
def game_c_env():
    return DefenceEnv(GameSpec(Game.C), SimConfig(scenario=Scenario.MODIFIED_9U6E))


def make_env(game: Game, scenario=Scenario.MODIFIED_9U6E, red=RedMode.BLINE,
             episode_length=512, gamma=0.99):
    return DefenceEnv(
        GameSpec(game, gamma=gamma, episode_length=episode_length),
        SimConfig(scenario=scenario, red_mode=red),
    )
