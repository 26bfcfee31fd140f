"""Learned versus uniform-assumption tables when users cluster in hot zones."""
import os

from cachecast import sim

from _common import load, parser, write_csv


def main():
    args = parser(__doc__, "hotzone.yaml").parse_args()
    cfg = load(args)
    rows = sim.sweep(cfg, workers=args.workers)
    by = {(r.sweep_param, r.policy): r for r in rows}
    out = []
    for r in rows:
        gain, se = sim.paired_difference(by[(r.sweep_param, "proposed-uniform")], r)
        out.append([r.sweep_param, r.policy, r.mean_cost, r.stderr, gain, se, r.n_seeds])
        print(f"lT={r.sweep_param:>5g} {r.policy:>16s} mean={r.mean_cost:.5g} +/- {r.stderr:.2g} "
              f"saving vs uniform={gain:.4g} +/- {se:.2g}")
    write_csv(os.path.join(args.out, "hotzone.csv"),
              ["load", "policy", "mean_cost", "stderr", "saving_vs_uniform", "saving_stderr", "n_seeds"],
              out)


if __name__ == "__main__":
    main()
