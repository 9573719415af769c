"""Ground-truth network defence simulation.

Three subnets (user, enterprise, operational) of hosts with a four-level red
intrusion ladder per host. A scripted red agent (uniform random walk over its
legal moves, or a fixed shortest path to the operational server) attacks; the
blue agent analyses, removes, restores and starts services; a green agent
samples one host per step and counts the ports it can reach.

One environment step runs blue → red → green in that order on a single
seeded generator, so identical (scenario, seed, blue action sequence) replays
bit-identically. ``User0`` is the permanent red foothold: always Privileged,
always known to red, never a valid blue target.

Red move legality: Scan needs the target currently reachable (user subnet
always; enterprise while red holds UserAccess+ on any user host; the
operational server while red is Privileged on a gateway enterprise server;
operational hosts while red holds UserAccess+ on the server). Exploit and
Escalate depend only on the host's current red level, so red keeps a chain it
already started even if blue cuts the path behind it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

from .errors import ConfigurationError, InvalidActionError
from . import rngutil


class Subnet(IntEnum):
    USER = 0
    ENTERPRISE = 1
    OPERATIONAL = 2


class RedLevel(IntEnum):
    NONE = 0
    SCANNED = 1
    USER_ACCESS = 2
    PRIVILEGED = 3


class KnownLevel(IntEnum):
    # Value order fixes the observation one-hot layout: a never-inspected
    # host encodes as [0, 1, 0, 0].
    NONE = 0
    UNKNOWN = 1
    USER_ACCESS = 2
    PRIVILEGED = 3


# Enterprise index reserved for the Defender host; operational index 0 is the
# operational server, 1..3 the operational hosts.
DEFENDER_INDEX = 6


@dataclass(frozen=True, order=True)
class HostId:
    subnet: Subnet
    index: int

    def __str__(self) -> str:
        if self.subnet == Subnet.USER:
            return f"User{self.index}"
        if self.subnet == Subnet.ENTERPRISE:
            return "Defender" if self.index == DEFENDER_INDEX else f"Ent{self.index}"
        return "OpServer0" if self.index == 0 else f"OpHost{self.index - 1}"

    @property
    def is_op_server(self) -> bool:
        return self.subnet == Subnet.OPERATIONAL and self.index == 0

    @property
    def is_op_host(self) -> bool:
        return self.subnet == Subnet.OPERATIONAL and self.index > 0

    @property
    def is_defender(self) -> bool:
        return self.subnet == Subnet.ENTERPRISE and self.index == DEFENDER_INDEX


USER0 = HostId(Subnet.USER, 0)


class Scenario(Enum):
    CAGE2_ORIGINAL = "Cage2Original"
    MODIFIED_9U6E = "Modified9u6e"


class RedMode(Enum):
    MEANDER = "meander"
    BLINE = "b-line"


def roster(scenario: Scenario) -> tuple[HostId, ...]:
    """All hosts in fixed order (User0 first, then the defendable hosts)."""
    if scenario == Scenario.MODIFIED_9U6E:
        users = [HostId(Subnet.USER, i) for i in range(10)]
        ents = [HostId(Subnet.ENTERPRISE, i) for i in range(6)]
        ops = [HostId(Subnet.OPERATIONAL, i) for i in range(4)]
    elif scenario == Scenario.CAGE2_ORIGINAL:
        users = [HostId(Subnet.USER, i) for i in range(5)]
        ents = [HostId(Subnet.ENTERPRISE, i) for i in range(3)]
        ops = [HostId(Subnet.OPERATIONAL, 0)]
    else:
        raise ConfigurationError(f"unknown scenario {scenario!r}")
    defender = [HostId(Subnet.ENTERPRISE, DEFENDER_INDEX)]
    return tuple(users + ents + defender + ops)


def op_gateways(scenario: Scenario) -> tuple[HostId, ...]:
    """Enterprise servers that border the operational server."""
    if scenario == Scenario.MODIFIED_9U6E:
        return (HostId(Subnet.ENTERPRISE, 2), HostId(Subnet.ENTERPRISE, 5))
    return (HostId(Subnet.ENTERPRISE, 2),)


@dataclass
class SimConfig:
    scenario: Scenario = Scenario.MODIFIED_9U6E
    red_mode: RedMode = RedMode.BLINE
    baseline_ports: int = 4
    max_ports: int = 12
    green_subgroup: tuple[HostId, ...] | None = None  # None = users + ent servers

    def resolved_subgroup(self, hosts: tuple[HostId, ...]) -> tuple[HostId, ...]:
        if self.green_subgroup is not None:
            group = tuple(self.green_subgroup)
        else:
            group = tuple(
                h
                for h in hosts
                if (h.subnet == Subnet.USER and h != USER0)
                or (h.subnet == Subnet.ENTERPRISE and not h.is_defender)
            )
        if not group:
            raise ConfigurationError("green subgroup is empty")
        return group


@dataclass
class HostState:
    id: HostId
    red: RedLevel = RedLevel.NONE
    ports_open: int = 4
    baseline_ports: int = 4
    known: KnownLevel = KnownLevel.UNKNOWN
    scan_flag: bool = False
    exploit_flag: bool = False
    restored_this_step: bool = False


class BlueKind(IntEnum):
    SLEEP = 0
    ANALYSE = 1
    REMOVE = 2
    RESTORE = 3
    START_SERVICE = 4


@dataclass(frozen=True)
class BlueAction:
    kind: BlueKind
    target: HostId | None = None

    def __str__(self) -> str:
        if self.kind == BlueKind.SLEEP:
            return "Sleep"
        return f"{self.kind.name.title().replace('_', '')}({self.target})"


SLEEP = BlueAction(BlueKind.SLEEP)


class RedKind(IntEnum):
    SLEEP = 0
    DISCOVER = 1
    SCAN = 2
    EXPLOIT = 3
    ESCALATE = 4
    IMPACT = 5


@dataclass(frozen=True)
class RedMove:
    kind: RedKind
    host: HostId | None = None
    subnet: Subnet | None = None


@dataclass
class RedOutcome:
    move: RedMove
    impact_fired: bool = False


@dataclass
class GreenOutcome:
    sampled_host: HostId
    ports_accessed: int


@dataclass
class NetworkState:
    scenario: Scenario
    config: SimConfig
    hosts: dict[HostId, HostState]
    red_known: set[HostId]
    red_mode: RedMode
    bline_stage: int
    t: int
    rng: np.random.Generator

    @property
    def roster(self) -> tuple[HostId, ...]:
        return tuple(self.hosts.keys())

    @property
    def defendable(self) -> tuple[HostId, ...]:
        return tuple(h for h in self.hosts if h != USER0)

    def host(self, hid: HostId) -> HostState:
        return self.hosts[hid]

    def clone(self) -> "NetworkState":
        return copy.deepcopy(self)


def build_topology(scenario: Scenario, rng_seed: int, config: SimConfig | None = None) -> NetworkState:
    """Fresh network at t=0: everything clean except the User0 foothold."""
    if config is None:
        config = SimConfig(scenario=scenario)
    elif config.scenario != scenario:
        config = replace(config, scenario=scenario)
    if not isinstance(scenario, Scenario):
        raise ConfigurationError(f"unknown scenario {scenario!r}")
    hosts: dict[HostId, HostState] = {}
    for hid in roster(scenario):
        hosts[hid] = HostState(
            id=hid,
            ports_open=config.baseline_ports,
            baseline_ports=config.baseline_ports,
        )
    hosts[USER0].red = RedLevel.PRIVILEGED
    return NetworkState(
        scenario=scenario,
        config=config,
        hosts=hosts,
        red_known={USER0},
        red_mode=config.red_mode,
        bline_stage=0,
        t=0,
        rng=rngutil.rng_from(rng_seed, rngutil.ENV),
    )


def clear_step_flags(state: NetworkState) -> None:
    """Reset per-step indicators; runs at the top of every environment step."""
    for hs in state.hosts.values():
        hs.scan_flag = False
        hs.exploit_flag = False
        hs.restored_this_step = False


# --- red -------------------------------------------------------------------

def _reachable(state: NetworkState, hid: HostId) -> bool:
    if hid.subnet == Subnet.USER:
        return True
    if hid.subnet == Subnet.ENTERPRISE:
        return any(
            state.hosts[h].red >= RedLevel.USER_ACCESS
            for h in state.hosts
            if h.subnet == Subnet.USER
        )
    if hid.is_op_server:
        return any(
            state.hosts[g].red == RedLevel.PRIVILEGED for g in op_gateways(state.scenario)
        )
    # operational hosts hang off the operational server
    server = HostId(Subnet.OPERATIONAL, 0)
    return server in state.hosts and state.hosts[server].red >= RedLevel.USER_ACCESS


def legal_red_moves(state: NetworkState) -> list[RedMove]:
    """Deterministically ordered legal moves for the random-walk red agent."""
    moves: list[RedMove] = []
    for subnet in (Subnet.USER, Subnet.ENTERPRISE, Subnet.OPERATIONAL):
        if any(
            h.subnet == subnet and h not in state.red_known and _reachable(state, h)
            for h in state.hosts
        ):
            moves.append(RedMove(RedKind.DISCOVER, subnet=subnet))
    for h, hs in state.hosts.items():
        if h in state.red_known and hs.red == RedLevel.NONE and _reachable(state, h):
            moves.append(RedMove(RedKind.SCAN, host=h))
    for h, hs in state.hosts.items():
        if hs.red == RedLevel.SCANNED:
            moves.append(RedMove(RedKind.EXPLOIT, host=h))
    for h, hs in state.hosts.items():
        if hs.red == RedLevel.USER_ACCESS:
            moves.append(RedMove(RedKind.ESCALATE, host=h))
    server = HostId(Subnet.OPERATIONAL, 0)
    if server in state.hosts and state.hosts[server].red == RedLevel.PRIVILEGED:
        moves.append(RedMove(RedKind.IMPACT, host=server))
    return moves


def _bline_move(state: NetworkState) -> tuple[RedMove, int]:
    """Next scripted move, derived from the deepest still-held stage."""
    ent2 = HostId(Subnet.ENTERPRISE, 2)
    server = HostId(Subnet.OPERATIONAL, 0)
    srv = state.hosts[server].red
    if srv == RedLevel.PRIVILEGED:
        return RedMove(RedKind.IMPACT, host=server), 6
    if srv == RedLevel.USER_ACCESS:
        return RedMove(RedKind.ESCALATE, host=server), 5
    if srv == RedLevel.SCANNED:
        return RedMove(RedKind.EXPLOIT, host=server), 4
    gate = state.hosts[ent2].red
    if gate == RedLevel.PRIVILEGED:
        return RedMove(RedKind.SCAN, host=server), 3
    if gate == RedLevel.USER_ACCESS:
        return RedMove(RedKind.ESCALATE, host=ent2), 2
    if gate == RedLevel.SCANNED:
        return RedMove(RedKind.EXPLOIT, host=ent2), 1
    return RedMove(RedKind.SCAN, host=ent2), 0


def _apply_red_move(state: NetworkState, move: RedMove) -> RedOutcome:
    impact = False
    if move.kind == RedKind.DISCOVER:
        for h in state.hosts:
            if h.subnet == move.subnet and h not in state.red_known and _reachable(state, h):
                state.red_known.add(h)
    elif move.kind == RedKind.SCAN:
        hs = state.hosts[move.host]
        state.red_known.add(move.host)
        if hs.red < RedLevel.SCANNED:
            hs.red = RedLevel.SCANNED
        hs.scan_flag = True
    elif move.kind == RedKind.EXPLOIT:
        hs = state.hosts[move.host]
        if hs.red < RedLevel.USER_ACCESS:
            hs.red = RedLevel.USER_ACCESS
        hs.exploit_flag = True
    elif move.kind == RedKind.ESCALATE:
        hs = state.hosts[move.host]
        if hs.red < RedLevel.PRIVILEGED:
            hs.red = RedLevel.PRIVILEGED
    elif move.kind == RedKind.IMPACT:
        impact = state.hosts[HostId(Subnet.OPERATIONAL, 0)].red == RedLevel.PRIVILEGED
    return RedOutcome(move=move, impact_fired=impact)


def red_step(state: NetworkState) -> RedOutcome:
    """Advance the red agent by one move, mutating the state."""
    if state.red_mode == RedMode.BLINE:
        move, stage = _bline_move(state)
        state.bline_stage = stage
    else:
        moves = legal_red_moves(state)
        if not moves:
            return RedOutcome(move=RedMove(RedKind.SLEEP))
        move = moves[int(state.rng.integers(len(moves)))]
    return _apply_red_move(state, move)


# --- blue ------------------------------------------------------------------

def _observable(red: RedLevel) -> KnownLevel:
    if red == RedLevel.PRIVILEGED:
        return KnownLevel.PRIVILEGED
    if red == RedLevel.USER_ACCESS:
        return KnownLevel.USER_ACCESS
    return KnownLevel.NONE


def blue_apply(state: NetworkState, action: BlueAction) -> None:
    """Apply one blue action; raises on User0 or unknown targets."""
    if action.kind == BlueKind.SLEEP:
        return
    target = action.target
    if target == USER0:
        raise InvalidActionError(f"{action} targets the red foothold User0")
    if target not in state.hosts:
        raise InvalidActionError(f"{action} targets a host outside the scenario")
    hs = state.hosts[target]
    if action.kind == BlueKind.ANALYSE:
        hs.known = _observable(hs.red)
    elif action.kind == BlueKind.REMOVE:
        if hs.red == RedLevel.USER_ACCESS:
            hs.red = RedLevel.NONE
            hs.known = KnownLevel.NONE
        elif hs.red != RedLevel.PRIVILEGED:
            hs.known = KnownLevel.NONE
        # Privileged access survives Remove and gives no feedback.
    elif action.kind == BlueKind.RESTORE:
        hs.red = RedLevel.NONE
        hs.ports_open = hs.baseline_ports
        hs.known = KnownLevel.NONE
        hs.restored_this_step = True
    elif action.kind == BlueKind.START_SERVICE:
        hs.ports_open = min(hs.ports_open + 1, state.config.max_ports)
    else:
        raise InvalidActionError(f"unknown blue action kind {action.kind!r}")


# --- green -----------------------------------------------------------------

def green_step(state: NetworkState) -> GreenOutcome:
    """Sample one subgroup host and count the ports it can access."""
    group = state.config.resolved_subgroup(state.roster)
    hid = group[int(state.rng.integers(len(group)))]
    hs = state.hosts[hid]
    ports = 0 if hs.restored_this_step else hs.ports_open
    return GreenOutcome(sampled_host=hid, ports_accessed=ports)
