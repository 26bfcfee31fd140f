"""Proactive multicast: gain versus load, and cost versus opportunity period.

The period sweep runs at ``--period-load`` and reuses every episode seed, so
consecutive periods are compared on paired differences.
"""
import math
import os

from cachecast import sim

from _common import load, parser, write_csv

PERIODS = [500.0, 200.0, 100.0, 50.0, 20.0, 10.0, 5.0, 2.0]


def main():
    p = parser(__doc__, "proactive.yaml")
    p.add_argument("--period-load", type=float, default=20.0)
    args = p.parse_args()
    cfg = load(args)
    pols = ["proposed", "proposed+proactive"]
    rows = sim.sweep(cfg, policies=pols, workers=args.workers)
    by = {(r.sweep_param, r.policy): r for r in rows}
    out = []
    for v in cfg.sweep.values:
        gain, se = sim.paired_difference(by[(v, "proposed")], by[(v, "proposed+proactive")])
        out.append([v, by[(v, "proposed")].mean_cost, by[(v, "proposed+proactive")].mean_cost, gain, se])
        print(f"lT={v:>5g} reactive={out[-1][1]:.5g} proactive={out[-1][2]:.5g} gain={gain:.4g} +/- {se:.2g}")
    write_csv(os.path.join(args.out, "proactive_load.csv"),
              ["load", "reactive_cost", "proactive_cost", "gain", "gain_stderr"], out)

    point = sim.point_config(cfg, "load", args.period_load)
    prow = sim.sweep(point, values=PERIODS, parameter="proactive.period", policies=["proposed+proactive"],
                     workers=args.workers)
    out = []
    for k, r in enumerate(prow):
        d, se = sim.paired_difference(prow[k - 1], r) if k else (math.nan, math.nan)
        out.append([r.sweep_param, r.mean_cost, r.stderr, d, se])
        print(f"period={r.sweep_param:>5g} cost={r.mean_cost:.5g} +/- {r.stderr:.2g} "
              f"drop vs previous={d:.4g} +/- {se:.2g}")
    write_csv(os.path.join(args.out, "proactive_period.csv"),
              ["period", "mean_cost", "stderr", "drop_vs_previous", "drop_stderr"], out)


if __name__ == "__main__":
    main()
