"""Command-line entry point.

One JSON run-configuration format feeds every subcommand; flags override file
values. Trainer blocks use the hyperparameter key names from the original
tuning runs (``wght_strat``, ``updt_epoch``, ``n_minibatch``, ...) so those
blocks paste in unchanged. Unknown keys are rejected by name.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, evalharness, moppo, pcn
from .env import Game, GameSpec
from .errors import ConfigurationError
from .moppo import PpoConfig, WeightingStrategy
from .nn import load_checkpoint
from .pareto import ParetoPoint, WeightVector, pareto_prune, read_front_csv, write_front_csv
from .pcn import PcnConfig
from .policies import policy_from_checkpoint
from .serialize import config_hash, jsonl_line
from .simnet import RedMode, Scenario, SimConfig

SCENARIO_NAMES = {
    "Cage2Original": Scenario.CAGE2_ORIGINAL,
    "Scenario2": Scenario.CAGE2_ORIGINAL,
    "Scenario2.yaml": Scenario.CAGE2_ORIGINAL,
    "Modified9u6e": Scenario.MODIFIED_9U6E,
    "Scenario2-9userhosts-6enthosts.yaml": Scenario.MODIFIED_9U6E,
}

GAME_NAMES = {"A": Game.A, "B": Game.B, "C": Game.C, 0: Game.A, 1: Game.B, 6: Game.C}

RED_NAMES = {"b-line": RedMode.BLINE, "bline": RedMode.BLINE, "meander": RedMode.MEANDER}

# trainer-block keys: config key -> PpoConfig field (None = accepted, unused)
PPO_KEYS = {
    "gamma": "gamma",
    "weights": None,
    "total_timesteps": "total_timesteps",
    "eval_freq": "eval_freq",
    "eval_episodes": "eval_episodes",
    "wght_strat": None,
    "num_envs": "num_envs",
    "n_minibatch": "minibatches",
    "num_steps": "num_steps",
    "updt_epoch": "update_epochs",
    "learning_rate": "learning_rate",
    "seed": "seed",
    "anneal_lr": "anneal_lr",
    "clip_coef": "clip_coef",
    "ent_coef": "ent_coef",
    "vf_coef": "vf_coef",
    "clip_vloss": "clip_vloss",
    "max_grad_norm": "max_grad_norm",
    "norm_adv": "norm_adv",
    "gae_lambda": "gae_lambda",
    # accepted for paste-in compatibility; drive nothing
    "num_episodes": None,
    "steps_per_iteration": None,
    "target_kl": None,
    "gae": None,
    "game": None,
    "scenario": None,
    "redagenttype": None,
}

PCN_KEYS = {
    "ref_point": "ref_point",
    "hv_ref_point": "hv_ref_point",
    "max_return": "max_return",
    "max_steps": "max_steps",
    "total_timesteps": "total_timesteps",
    "batch_size": "batch_size",
    "scaling_factor": "scaling_factor",
    "learning_rate": "learning_rate",
    "num_er_episodes": "num_er_episodes",
    "max_buffer_size": "max_buffer_size",
    "num_model_updates": "num_model_updates",
    "gamma": "gamma",
    "hidden_dim": "hidden_dim",
    "noise": "noise",
    "num_step_episodes": "num_step_episodes",
    "num_points_pf": "num_points_pf",
    "seed": "seed",
    "eval_freq": "eval_freq",
    "known_pareto_front": None,
    "project_name": None,
    "experiment_name": None,
    "game": None,
    "scenario": None,
    "redagenttype": None,
}

TOP_KEYS = {"scenario", "game", "redagenttype", "trainer", "eval", "out", "seed", "seeds",
            "episode_length", "baseline_ports", "max_ports"}

EVAL_KEYS = {"n_episodes", "seed", "mode"}


def _lookup(table: dict, value, what: str):
    if isinstance(value, str) and value in table:
        return table[value]
    if value in table:
        return table[value]
    raise ConfigurationError(f"unknown {what} {value!r} (expected one of {sorted(map(str, table))})")


class RunConfig:
    """Validated run configuration: file values merged with flag overrides."""

    def __init__(self, raw: dict):
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigurationError(f"unknown configuration key(s): {sorted(unknown)}")
        trainer = dict(raw.get("trainer", {}))
        self.trainer_raw = trainer
        eval_block = dict(raw.get("eval", {}))
        bad_eval = set(eval_block) - EVAL_KEYS
        if bad_eval:
            raise ConfigurationError(f"unknown eval key(s): {sorted(bad_eval)}")
        self.eval_block = eval_block

        def merged(key):
            top = raw.get(key)
            inner = trainer.get(key)
            if top is not None and inner is not None and top != inner:
                raise ConfigurationError(
                    f"{key!r} set to {top!r} at top level but {inner!r} in the trainer block"
                )
            return top if top is not None else inner

        self.scenario = _lookup(SCENARIO_NAMES, merged("scenario") or "Modified9u6e", "scenario")
        self.game = _lookup(GAME_NAMES, merged("game") if merged("game") is not None else "C", "game")
        self.red_mode = _lookup(RED_NAMES, merged("redagenttype") or "b-line", "redagenttype")
        self.episode_length = int(raw.get("episode_length", 512))
        self.out = raw.get("out")
        self.seed = raw.get("seed")
        self.seeds = raw.get("seeds")
        self.sim = SimConfig(
            scenario=self.scenario,
            red_mode=self.red_mode,
            baseline_ports=int(raw.get("baseline_ports", 4)),
            max_ports=int(raw.get("max_ports", 12)),
        )
        self.raw = raw

    def game_spec(self, gamma: float) -> GameSpec:
        return GameSpec(self.game, gamma=gamma, episode_length=self.episode_length)

    def ppo_config(self, overrides: dict | None = None) -> PpoConfig:
        block = dict(self.trainer_raw)
        unknown = set(block) - set(PPO_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown trainer key(s) for a PPO run: {sorted(unknown)}")
        kwargs = {}
        for key, field_name in PPO_KEYS.items():
            if field_name is not None and key in block:
                kwargs[field_name] = block[key]
        for name in ("total_timesteps", "eval_freq", "num_envs", "minibatches",
                     "num_steps", "update_epochs", "seed", "eval_episodes"):
            if name in kwargs:
                kwargs[name] = int(kwargs[name])
        if "weights" in block:
            kwargs["weights"] = WeightVector.of(block["weights"])
        if "wght_strat" in block:
            kwargs["weighting_strategy"] = _lookup(
                {"linear": WeightingStrategy.LINEAR, "chebyshev": WeightingStrategy.CHEBYSHEV},
                block["wght_strat"], "wght_strat",
            )
        if self.seed is not None:
            kwargs["seed"] = int(self.seed)
        if overrides:
            kwargs.update(overrides)
        try:
            return PpoConfig(**kwargs)
        except TypeError as e:
            raise ConfigurationError(str(e)) from e

    def pcn_config(self, overrides: dict | None = None) -> PcnConfig:
        block = dict(self.trainer_raw)
        unknown = set(block) - set(PCN_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown trainer key(s) for a PCN run: {sorted(unknown)}")
        kwargs = {}
        for key, field_name in PCN_KEYS.items():
            if field_name is not None and key in block:
                kwargs[field_name] = block[key]
        for name in ("ref_point", "hv_ref_point", "max_return", "scaling_factor"):
            if name in kwargs:
                kwargs[name] = tuple(float(v) for v in kwargs[name])
        for name in ("total_timesteps", "batch_size", "max_buffer_size", "num_er_episodes",
                     "num_model_updates", "hidden_dim", "num_step_episodes", "num_points_pf",
                     "max_steps", "seed", "eval_freq"):
            if name in kwargs:
                kwargs[name] = int(kwargs[name])
        if self.seed is not None:
            kwargs["seed"] = int(self.seed)
        if overrides:
            kwargs.update(overrides)
        try:
            return PcnConfig(**kwargs)
        except TypeError as e:
            raise ConfigurationError(str(e)) from e

    def initial_front(self) -> list[ParetoPoint] | None:
        raw = self.trainer_raw.get("known_pareto_front")
        if raw is None:
            return None
        if isinstance(raw, str):
            raw = json.loads(raw)
        return [ParetoPoint.of(p) for p in raw]


def load_run_config(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config {path} is not valid JSON: {e}") from e
    if getattr(args, "out", None):
        raw["out"] = args.out
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    return RunConfig(raw)


def write_manifest(out: Path, command: str, argv: list[str], cfg_dict: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": argv,
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "modef": __version__,
        },
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8"
    )


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ConfigurationError("an output directory is required (--out or \"out\" in the config)")
    return Path(cfg.out)


def hashable_run(cfg: RunConfig) -> dict:
    """Run parameters that determine results; output location excluded."""
    d = dict(cfg.raw)
    d.pop("out", None)
    return d


def cmd_train_moppo(args, argv) -> int:
    cfg = load_run_config(args)
    overrides = {}
    if args.weights:
        overrides["weights"] = WeightVector.of([float(v) for v in args.weights.split(",")])
    if args.strategy:
        overrides["weighting_strategy"] = WeightingStrategy(args.strategy)
    ppo = cfg.ppo_config(overrides)
    if ppo.n_obj != cfg.game.n_obj:
        raise ConfigurationError(
            f"game {cfg.game.value} has {cfg.game.n_obj} objectives; "
            f"got {ppo.n_obj} weights"
        )
    out = _require_out(cfg)
    cfg_dict = {"run": hashable_run(cfg), "resolved": asdict_safe(ppo)}
    write_manifest(out, "train-moppo", argv, cfg_dict)
    game = cfg.game_spec(gamma=ppo.gamma)
    ckpt, log = moppo.train(
        ppo, game, scenario=cfg.scenario, sim_config=cfg.sim, out_dir=out,
        config_hash=config_hash(cfg_dict),
    )
    print(f"trained moppo policy -> {out / 'policy.meta.json'} ({len(log)} eval points)")
    return 0


def cmd_train_pcn(args, argv) -> int:
    cfg = load_run_config(args)
    pc = cfg.pcn_config()
    if cfg.game.n_obj != pc.n_obj:
        raise ConfigurationError(
            f"game {cfg.game.value} has {cfg.game.n_obj} objectives; "
            f"scaling_factor implies {pc.n_obj}"
        )
    out = _require_out(cfg)
    cfg_dict = {"run": hashable_run(cfg), "resolved": asdict_safe(pc)}
    write_manifest(out, "train-pcn", argv, cfg_dict)
    game = cfg.game_spec(gamma=pc.gamma)
    ckpt, log = pcn.train_pcn(
        pc, game, scenario=cfg.scenario, sim_config=cfg.sim, out_dir=out,
        initial_front=cfg.initial_front(), config_hash=config_hash(cfg_dict),
    )
    print(f"trained pcn policy -> {out / 'pcn.meta.json'} ({len(log)} front snapshots)")
    return 0


def cmd_sweep(args, argv) -> int:
    cfg = load_run_config(args)
    if cfg.game.n_obj != 2:
        raise ConfigurationError("sweep requires a two-objective game")
    overrides = {"weights": WeightVector.of([0.5, 0.5])}
    if args.strategy:
        overrides["weighting_strategy"] = WeightingStrategy(args.strategy)
    ppo = cfg.ppo_config(overrides)
    out = _require_out(cfg)
    cfg_dict = {"run": hashable_run(cfg), "resolved": asdict_safe(ppo)}
    write_manifest(out, "sweep", argv, cfg_dict)
    game = cfg.game_spec(gamma=ppo.gamma)
    eval_episodes = int(args.episodes or cfg.eval_block.get("n_episodes", 200))
    front, ckpts = moppo.weight_sweep(
        ppo, game, scenario=cfg.scenario, sim_config=cfg.sim, out_dir=out,
        eval_episodes=eval_episodes, eval_seed=int(cfg.eval_block.get("seed", 10_000)),
    )
    print(f"swept {len(ckpts)} weightings -> {out / 'front.csv'}")
    return 0


def cmd_eval(args, argv) -> int:
    cfg = load_run_config(args)
    if not args.checkpoint:
        raise ConfigurationError("--checkpoint is required for eval")
    ckpt = load_checkpoint(args.checkpoint)
    game_value = ckpt.extra.get("game", cfg.game.value)
    game = GameSpec(
        Game(game_value),
        gamma=float(ckpt.extra.get("gamma", 0.99)),
        episode_length=int(ckpt.extra.get("episode_length", cfg.episode_length)),
    )
    n_episodes = int(args.episodes or cfg.eval_block.get("n_episodes", 1000))
    seed = int(cfg.eval_block.get("seed", cfg.seed or 0))
    summary = evalharness.evaluate(
        ckpt, game, scenario=cfg.scenario, sim_config=cfg.sim,
        n_episodes=n_episodes, seed=seed, tag=Path(args.checkpoint).name,
        mode=cfg.eval_block.get("mode"),
    )
    line = jsonl_line(summary.as_dict())
    print(line)
    if cfg.out:
        out = _require_out(cfg)
        write_manifest(out, "eval", argv, {"run": hashable_run(cfg), "checkpoint": str(args.checkpoint)})
        (out / "summary.jsonl").write_text(line + "\n", encoding="utf-8")
    return 0


def cmd_rollout(args, argv) -> int:
    cfg = load_run_config(args)
    if not args.checkpoint:
        raise ConfigurationError("--checkpoint is required for rollout")
    ckpt = load_checkpoint(args.checkpoint)
    game_value = ckpt.extra.get("game", cfg.game.value)
    game = GameSpec(Game(game_value), episode_length=cfg.episode_length)
    seed = int(cfg.seed or 0)
    policy_a = policy_from_checkpoint(ckpt, tag=Path(args.checkpoint).name)
    if args.switch_to:
        other = load_checkpoint(args.switch_to)
        policy_b = policy_from_checkpoint(other, tag=Path(args.switch_to).name)
        record = evalharness.switch_rollout(
            policy_a, policy_b, int(args.switch_at), game, seed,
            scenario=cfg.scenario, sim_config=cfg.sim,
            tag_a=Path(args.checkpoint).name, tag_b=Path(args.switch_to).name,
        )
    else:
        record = evalharness.rollout(
            policy_a, game, seed, scenario=cfg.scenario, sim_config=cfg.sim,
            tag=Path(args.checkpoint).name,
        )
    out = _require_out(cfg)
    write_manifest(out, "rollout", argv, {"run": hashable_run(cfg), "checkpoint": str(args.checkpoint),
                                          "switch_to": args.switch_to, "switch_at": args.switch_at})
    path = out / "rollout.jsonl"
    evalharness.export_rollout(record, path)
    print(f"rollout ({len(record.steps)} steps) -> {path}")
    return 0


def cmd_prune_front(args, argv) -> int:
    if not args.infile:
        raise ConfigurationError("--in is required for prune-front")
    front = read_front_csv(args.infile)
    pruned = pareto_prune(front.points)
    out_path = Path(args.outfile) if args.outfile else Path(args.infile).with_name("pruned.csv")
    write_front_csv(out_path, pruned)
    print(f"{len(front.points)} points -> {len(pruned.points)} non-dominated -> {out_path}")
    return 0


def cmd_serve(args, argv) -> int:
    from .steersvc import PolicyPortfolio, ServeDefaults, serve

    cfg = load_run_config(args)
    if not args.portfolio:
        raise ConfigurationError("--portfolio is required for serve")
    portfolio = PolicyPortfolio.from_dir(args.portfolio)
    defaults = ServeDefaults(
        game=cfg.game_spec(gamma=1.0),
        sim=cfg.sim,
        seed=int(cfg.seed or 0),
        steps_per_sec=float(args.speed),
    )
    serve(portfolio, args.addr, defaults, record_dir=cfg.out)
    return 0


def asdict_safe(obj) -> dict:
    d = asdict(obj)

    def clean(v):
        if isinstance(v, WeightVector):
            return list(v.w)
        if isinstance(v, tuple):
            return list(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if hasattr(v, "value"):
            return v.value
        return v

    return {k: clean(v) for k, v in d.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modef", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run-configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed override")

    p = sub.add_parser("train-moppo", help="train one weighted-advantage PPO policy")
    common(p)
    p.add_argument("--weights", help="comma-separated objective weights, e.g. 0.4,0.6")
    p.add_argument("--strategy", choices=["linear", "chebyshev"])
    p.set_defaults(func=cmd_train_moppo)

    p = sub.add_parser("train-pcn", help="train a return-conditioned policy")
    common(p)
    p.set_defaults(func=cmd_train_pcn)

    p = sub.add_parser("sweep", help="train a policy per weighting and emit front.csv")
    common(p)
    p.add_argument("--strategy", choices=["linear", "chebyshev"])
    p.add_argument("--episodes", type=int, help="evaluation episodes per weighting")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a checkpoint over seeded episodes")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint base path or .meta.json")
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", help="record one episode, optionally switching policies")
    common(p)
    p.add_argument("--checkpoint", help="policy for steps before the switch")
    p.add_argument("--switch-to", dest="switch_to", help="policy for steps after the switch")
    p.add_argument("--switch-at", dest="switch_at", type=int, default=256)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("prune-front", help="drop dominated rows from a front CSV")
    p.add_argument("--in", dest="infile", help="input CSV (obj0,obj1,tag)")
    p.add_argument("--out", dest="outfile", help="output CSV path")
    p.set_defaults(func=cmd_prune_front)

    p = sub.add_parser("serve", help="run the live steering service")
    common(p)
    p.add_argument("--portfolio", help="directory of checkpoints")
    p.add_argument("--addr", default="127.0.0.1:8765")
    p.add_argument("--speed", type=float, default=4.0, help="steps per second (0 = manual)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
