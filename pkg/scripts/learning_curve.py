"""Learner error and across-seed variance as a function of the number of events."""
import os

import numpy as np
from scipy import stats

from cachecast import sim
from cachecast.cli import table_errors
from cachecast.learner import ValueLearner
from cachecast.topology import UserDistribution
from cachecast.traffic import synthetic_events
from cachecast.value_model import analytic_table

from _common import load, parser, write_csv

CHECKPOINTS = [10, 30, 100, 300, 1000, 3000, 10_000]


def main():
    p = parser(__doc__, "learn.yaml")
    p.add_argument("--runs", type=int, default=64)
    p.add_argument("--truth-scenarios", type=int, default=400_000)
    args = p.parse_args()
    cfg = load(args)
    env = sim.Environment.build(cfg, policies=["proposed-uniform"], n_max=20)
    truth = analytic_table(env.reference_file(), env.layout, UserDistribution(), env.shadowing, env.phy,
                           20, args.truth_scenarios,
                           np.random.default_rng(sim.seed_sequence(10_000 + cfg.simulation.seed, 1, 9)))
    ref = env.reference_file()
    errs = np.zeros((args.runs, len(CHECKPOINTS), 2))
    vals = np.zeros((args.runs, len(CHECKPOINTS), 1 + env.layout.num_caches))
    for s in range(args.runs):
        learner = ValueLearner(env.tables["uniform"], env.layout, env.phy)
        rng = np.random.default_rng(sim.seed_sequence(cfg.simulation.seed, 2, s))
        k = 0
        for t, ev in enumerate(synthetic_events(CHECKPOINTS[-1], env.dist, env.layout, env.shadowing, rng), 1):
            learner.observe(ev, ref)
            if t == CHECKPOINTS[k]:
                errs[s, k] = table_errors(learner.table(), truth)
                vals[s, k] = np.concatenate([[learner.v_star[1]], learner.v_star[1] + learner.excess[:, 1]])
                k += 1
    var = vals.var(axis=0, ddof=1)
    rows = [[t, *errs[:, k].mean(axis=0), *errs[:, k].max(axis=0), *var[k]] for k, t in enumerate(CHECKPOINTS)]
    slopes = [stats.linregress(np.log(CHECKPOINTS), np.log(var[:, j])).slope for j in range(var.shape[1])]
    print("variance log-log slopes (v_star[1], v_one[i][1]): " + ", ".join(f"{s:.3f}" for s in slopes))
    print(f"after {CHECKPOINTS[-1]} events: worst relative error v_star={errs[:, -1, 0].max():.3%} "
          f"v_one={errs[:, -1, 1].max():.3%}")
    write_csv(os.path.join(args.out, "learning_curve.csv"),
              ["t", "mean_err_v_star", "mean_err_v_one", "max_err_v_star", "max_err_v_one", "var_v_star_1"]
              + [f"var_v_one_{i + 1}_1" for i in range(env.layout.num_caches)], rows)


if __name__ == "__main__":
    main()
