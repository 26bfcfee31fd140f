"""Exact bound sandwich on every small instance: N_C in {1,2}, N_f in {1,2}, N <= n_max."""
import os

from cachecast.cli import bound_check_rows

from _common import load, parser, write_csv


def main():
    p = parser(__doc__, "bound_check.yaml")
    p.add_argument("--n-max", type=int, default=5)
    p.add_argument("--scenarios", type=int, default=20)
    p.add_argument("--layouts", type=int, default=5, help="seeds per (N_C, N_f)")
    args = p.parse_args()
    base = load(args)
    d = base.to_dict()
    out, bad = [], 0
    for nc in (1, 2):
        for nf in (1, 2):
            for seed in range(args.layouts):
                cfg = base.replace_path("layout.positions", d["layout"]["positions"][:nc])
                cfg = cfg.replace_path("users.hotzones", d["users"]["hotzones"][:nc])
                cfg = cfg.replace_path("files", [dict(d["files"][0], num_segments=nf)])
                cfg = cfg.replace_path("simulation.seed", seed)
                for mask, n, lo, exact, ref, up, ok in bound_check_rows(cfg, args.scenarios, args.n_max):
                    out.append([nc, nf, seed, mask, n, float(lo), float(exact), float(ref), float(up), int(ok)])
                    bad += not ok
    print(f"{len(out)} (state, N) pairs, {bad} violations")
    write_csv(os.path.join(args.out, "bound_sandwich.csv"),
              ["num_caches", "num_segments", "seed", "state", "N", "lower", "exact", "refined", "upper", "ok"],
              out)


if __name__ == "__main__":
    main()
