#!/usr/bin/env python3
"""Single-objective PPO vs equal-weight two-objective PPO at matched budgets.

Trains both algorithms over a set of seeds on the summed-defence game and its
two-objective decomposition, then writes mean +/- std training curves and a
comparison report (terminal returns, percentage difference, steps to 90% of
the improvement).

Example:
    python scripts/experiment1.py --out runs/exp1 --seeds 0,1,2,3,4 \
        --timesteps 163840
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from modef.evalharness import Experiment1Config, run_experiment_1
from modef.moppo import PpoConfig
from modef.simnet import RedMode, Scenario, SimConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--timesteps", type=int, default=163_840)
    ap.add_argument("--scenario", default="Modified9u6e",
                    choices=["Modified9u6e", "Cage2Original"])
    ap.add_argument("--red", default="b-line", choices=["b-line", "meander"])
    ap.add_argument("--eval-freq", type=int, default=16_384)
    ap.add_argument("--eval-episodes", type=int, default=8)
    args = ap.parse_args()

    scenario = Scenario(args.scenario)
    cfg = Experiment1Config(
        base=PpoConfig(
            total_timesteps=args.timesteps,
            eval_freq=args.eval_freq,
            eval_episodes=args.eval_episodes,
        ),
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        scenario=scenario,
        sim_config=SimConfig(scenario=scenario, red_mode=RedMode(args.red)),
    )
    report = run_experiment_1(cfg, out_dir=args.out)
    print(f"ppo terminal return:   {report['ppo_terminal_return']:.3f} "
          f"(90% of improvement at step {report['ppo_steps_to_90pct']})")
    print(f"moppo terminal return: {report['moppo_terminal_return']:.3f} "
          f"(90% of improvement at step {report['moppo_steps_to_90pct']})")
    print(f"difference: {report['terminal_return_diff_pct']:+.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
