"""Average total cost versus lambda*T for the proposed policy and both baselines.

Also reports each policy's gap to the proposed policy (paired over seeds) and
the cost-to-go lower bound at the empty initial state.
"""
import os

from cachecast import sim
from cachecast.traffic import truncation_horizon

from _common import load, parser, write_csv


def main():
    args = parser(__doc__, "desk.yaml").parse_args()
    cfg = load(args)
    n_max = max(truncation_horizon(v, cfg.tables.truncation_eps) for v in cfg.sweep.values)
    env = sim.Environment.build(cfg, n_max=n_max)
    rows = sim.sweep(cfg, workers=args.workers, env=env)
    by = {(r.sweep_param, r.policy): r for r in rows}
    out = []
    for r in rows:
        lb = sum(sim.lower_bound_per_file(env.at(sim.point_config(cfg, "load", r.sweep_param))))
        gap, se = sim.paired_difference(r, by[(r.sweep_param, "proposed")]) if "proposed" in \
            cfg.simulation.policies else (float("nan"), float("nan"))
        out.append([r.sweep_param, r.policy, r.mean_cost, r.stderr, gap, se, lb, r.n_seeds])
        print(f"lT={r.sweep_param:>5g} {r.policy:>10s} mean={r.mean_cost:.5g} +/- {r.stderr:.2g} "
              f"gap={gap:.4g} +/- {se:.2g} bound={lb:.5g}")
    write_csv(os.path.join(args.out, "load_sweep.csv"),
              ["load", "policy", "mean_cost", "stderr", "gap_vs_proposed", "gap_stderr",
               "lower_bound", "n_seeds"], out)


if __name__ == "__main__":
    main()
