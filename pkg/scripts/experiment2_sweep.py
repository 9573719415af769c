#!/usr/bin/env python3
"""Weight sweep on the two-objective defence/activity game.

Trains one policy per weighting (0.0 to 1.0 on the activity objective in
steps of 0.1 by default), evaluates each over seeded episodes, and writes the
tagged points to front.csv plus one checkpoint per weighting. Use
``--strategy chebyshev`` for the non-linear advantage scalarization.

Example:
    python scripts/experiment2_sweep.py --out runs/sweep --timesteps 106496 \
        --episodes 200
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from modef.env import Game, GameSpec
from modef.moppo import PpoConfig, WeightingStrategy, weight_sweep
from modef.pareto import WeightVector, pareto_prune
from modef.simnet import RedMode, Scenario, SimConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--timesteps", type=int, default=106_496)
    ap.add_argument("--episodes", type=int, default=200)
    ap.add_argument("--strategy", default="linear", choices=["linear", "chebyshev"])
    ap.add_argument("--scenario", default="Modified9u6e",
                    choices=["Modified9u6e", "Cage2Original"])
    ap.add_argument("--red", default="b-line", choices=["b-line", "meander"])
    ap.add_argument("--steps", type=float, default=0.1, help="weight grid spacing")
    args = ap.parse_args()

    scenario = Scenario(args.scenario)
    cfg = PpoConfig(
        total_timesteps=args.timesteps,
        weights=WeightVector.of([0.5, 0.5]),
        weighting_strategy=WeightingStrategy(args.strategy),
        seed=args.seed,
        eval_freq=args.timesteps,
        eval_episodes=4,
    )
    n = round(1.0 / args.steps)
    weights = [WeightVector.of([1.0 - k / n, k / n]) for k in range(n + 1)]
    front, ckpts = weight_sweep(
        cfg,
        GameSpec(Game.C),
        scenario=scenario,
        sim_config=SimConfig(scenario=scenario, red_mode=RedMode(args.red)),
        weights=weights,
        out_dir=args.out,
        eval_episodes=args.episodes,
    )
    print(f"swept {len(ckpts)} weightings; {len(pareto_prune(front.points))} non-dominated")
    print(f"results in {args.out}/front.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
