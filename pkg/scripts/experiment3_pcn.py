#!/usr/bin/env python3
"""Return-conditioned training on the two-objective game, with prompt evaluation.

Trains a PCN, logging the pruned front of prompted greedy evaluations as it
evolves, then prompts the final model at a list of targets (by default the
non-dominated returns it discovered; optionally a front CSV, e.g. the weight
sweep's means) and reports achieved mean/std per prompt.

Example:
    python scripts/experiment3_pcn.py --out runs/pcn --timesteps 500000 \
        --warm-start runs/sweep/front_points.csv --eval-episodes 100
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from modef.env import Game, GameSpec
from modef.pareto import read_front_csv
from modef.pcn import Command, PcnConfig, evaluate_points, train_pcn, write_points_csv
from modef.simnet import RedMode, Scenario, SimConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--timesteps", type=int, default=500_000)
    ap.add_argument("--warm-start", help="front CSV used as the first evaluation targets")
    ap.add_argument("--eval-episodes", type=int, default=100)
    ap.add_argument("--scenario", default="Modified9u6e",
                    choices=["Modified9u6e", "Cage2Original"])
    ap.add_argument("--red", default="meander", choices=["b-line", "meander"])
    args = ap.parse_args()

    scenario = Scenario(args.scenario)
    cfg = PcnConfig(total_timesteps=args.timesteps, seed=args.seed)
    initial = read_front_csv(args.warm_start).points if args.warm_start else None
    game = GameSpec(Game.C, gamma=cfg.gamma)
    ckpt, front_log = train_pcn(
        cfg, game, scenario=scenario,
        sim_config=SimConfig(scenario=scenario, red_mode=RedMode(args.red)),
        out_dir=args.out, initial_front=initial,
    )
    final_front = front_log[-1]["front"]
    print(f"final front: {len(final_front)} points, "
          f"hypervolume {front_log[-1]['hypervolume']:.1f} (vs ref {cfg.hv_ref_point})")

    targets = [Command(np.array(f), max(1, cfg.max_steps - 2)) for f in final_front]
    if targets:
        rows = evaluate_points(
            ckpt, targets, episodes_per_target=args.eval_episodes, game=game, cfg=cfg,
            scenario=scenario,
            sim_config=SimConfig(scenario=scenario, red_mode=RedMode(args.red)),
            seed=args.seed + 1,
        )
        out_csv = Path(args.out) / "prompt_eval.csv"
        write_points_csv(out_csv, rows)
        print(f"prompt evaluation -> {out_csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
