"""Command line entry point: ``cachecast <subcommand> --config FILE``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig
from .exact import StateSpaceTooLarge, exact_value_iteration, mask_to_state
from .learner import ValueLearner
from .sim import (Environment, default_workers, lower_bound_per_file, run_episode, seed_sequence,
                  sweep, write_rows)
from .traffic import synthetic_events, truncation_horizon
from .value_model import bounds, build_value_table, sample_scenarios


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.simulation.seed = args.seed
    if getattr(args, "policies", None):
        cfg.simulation.policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    return cfg.validate()


def _out_dir(args, cfg) -> str:
    d = args.out or cfg.output.dir
    os.makedirs(d, exist_ok=True)
    return d


def cmd_build_tables(args) -> int:
    cfg = _load_config(args)
    env = Environment.build(cfg)
    out = _out_dir(args, cfg)
    for kind, table in sorted(env.tables.items()):
        path = os.path.join(out, f"table_{kind}.csv")
        table.save(path)
        if table.v_star_stderr is not None:
            rel = table.v_one_stderr[:, 1:] / np.abs(table.v_one[:, 1:])
            print(f"{path}: n_max={table.n_max} max stderr v_star={table.v_star_stderr.max():.4g} "
                  f"max relative stderr v_one={rel.max():.3%}")
            se_path = os.path.join(out, f"table_{kind}_stderr.csv")
            with open(se_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["N", "v_star_stderr"] + [f"v_one_{i + 1}_stderr" for i in range(table.num_caches)])
                for n in range(table.n_max + 1):
                    w.writerow([n, repr(float(table.v_star_stderr[n]))]
                               + [repr(float(x)) for x in table.v_one_stderr[:, n]])
        else:
            print(f"{path}: n_max={table.n_max} (learned)")
    return 0


def bound_check_rows(cfg: ExperimentConfig, n_scenarios: int, n_max: int, corrupt: float = 0.0):
    """Evaluate lower/exact/refined/upper for every state and stage of a small exact instance."""
    master = cfg.simulation.seed
    env_layout = cfg.layout.build(np.random.default_rng(seed_sequence(master, 0)))
    dist = cfg.users.build(env_layout)
    f = cfg.files[0]
    rng = np.random.default_rng(seed_sequence(master, 4))
    sc = sample_scenarios(env_layout, dist, cfg.shadowing.build(), cfg.phy.build(), f.segment_bits,
                          n_scenarios, rng, num_segments=f.num_segments).symmetrized().exact()
    values = exact_value_iteration(sc, n_max)
    table = build_value_table(sc, n_max, f.num_segments, f.segment_bits)
    if corrupt:
        # deliberately wrong increments, for exercising the failure path
        table.v_one = table.v_star[None, :] + table.excess * (1 + type(table.v_star[0])(corrupt))
    rows = []
    for n in range(n_max + 1):
        for mask, exact in enumerate(values[n]):
            state = mask_to_state(mask, sc.num_caches, sc.num_segments)
            lo, up, ref = bounds(state, n, table, sc)
            rows.append((mask, n, lo, exact, ref, up, lo <= exact <= ref <= up))
    return rows


def cmd_bound_check(args) -> int:
    cfg = _load_config(args)
    try:
        rows = bound_check_rows(cfg, args.scenarios, args.n_max, args.corrupt)
    except StateSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args, cfg)
    path = os.path.join(out, "bound_check.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "N", "lower", "exact", "refined", "upper", "ok"])
        for r in rows:
            w.writerow([r[0], r[1]] + [repr(float(x)) for x in r[2:6]] + [int(r[6])])
    bad = sum(1 for r in rows if not r[6])
    print(f"{len(rows)} (state, N) pairs checked, {bad} violations -> {path}")
    return 0 if bad == 0 else 1


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    env = Environment.build(cfg)
    out = _out_dir(args, cfg)
    load = cfg.files[0].arrival_rate * cfg.files[0].lifetime
    rows = sweep(cfg, values=[load], parameter="load", workers=args.workers, env=env)
    write_rows(rows, os.path.join(out, "simulate.csv"))
    lbs = lower_bound_per_file(env)
    for r in rows:
        print(f"{r.policy:>24s}  mean={r.mean_cost:.6g}  stderr={r.stderr:.3g}  n={r.n_seeds}")
    print("lower bound per file: " + ", ".join(f"{x:.6g}" for x in lbs))
    if cfg.output.event_log:
        with open(os.path.join(out, "events.jsonl"), "w") as fh:
            for p in cfg.simulation.policies:
                ep = run_episode(env, 0, p)
                for rec in ep.log:
                    fh.write(json.dumps({"policy": p, "time": rec.time, "kind": rec.kind,
                                         "file": rec.file_id, "region": rec.region,
                                         "energy": rec.energy, "symbols": rec.symbols,
                                         "transmissions": [list(t[:4]) + [list(t[4])]
                                                           for t in rec.transmissions]}) + "\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    rows = sweep(cfg, workers=args.workers)
    path = os.path.join(out, "sweep.csv")
    write_rows(rows, path)
    for r in rows:
        print(f"{r.sweep_param:>10g} {r.policy:>24s}  mean={r.mean_cost:.6g}  stderr={r.stderr:.3g}")
    print(f"-> {path}")
    return 0


def cmd_learn(args) -> int:
    cfg = _load_config(args)
    n_max = truncation_horizon(max(f.arrival_rate * f.lifetime for f in cfg.files),
                               cfg.tables.truncation_eps)
    env = Environment.build(cfg, policies=["proposed-uniform"], n_max=n_max)
    truth = env.tables["true"]
    prior = env.tables["uniform"]
    out = _out_dir(args, cfg)
    learner = ValueLearner(prior, env.layout, env.phy, tau=cfg.learning.tau)
    rng = np.random.default_rng(seed_sequence(cfg.simulation.seed, 2))
    ref = env.reference_file()
    n = cfg.learning.events
    checkpoints = set(np.unique(np.logspace(0, math.log10(max(n, 1)), 40).astype(int)).tolist()) | {n}
    path = os.path.join(out, "learn.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "max_rel_err_v_star", "max_rel_err_v_one", "last_change", "converged"])
        for t, ev in enumerate(synthetic_events(n, env.dist, env.layout, env.shadowing, rng,
                                                ref.num_segments), start=1):
            learner.observe(ev, ref)
            if t in checkpoints:
                tab = learner.table()
                e_star, e_one = table_errors(tab, truth)
                w.writerow([t, repr(e_star), repr(e_one), repr(learner.last_change),
                            int(learner.converged())])
    learner.table().save(os.path.join(out, "table_learned.csv"))
    e_star, e_one = table_errors(learner.table(), truth)
    print(f"after {n} events: max relative error v_star={e_star:.3%} v_one={e_one:.3%} "
          f"converged={learner.converged()} -> {path}")
    return 0


def table_errors(est, truth) -> tuple[float, float]:
    """Largest relative error over stages N >= 1 of ``v_star`` and ``v_one``."""
    s = np.abs(est.v_star[1:] - truth.v_star[1:]) / np.abs(truth.v_star[1:])
    o = np.abs(est.v_one[:, 1:] - truth.v_one[:, 1:]) / np.abs(truth.v_one[:, 1:])
    return float(s.max()), float(o.max())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cachecast", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policies=False, workers=False):
        sp.add_argument("--config", help="YAML experiment config (defaults used when omitted)")
        sp.add_argument("--seed", type=int, help="override simulation.seed")
        sp.add_argument("--out", help="output directory (default: output.dir)")
        if policies:
            sp.add_argument("--policies", help="comma separated policy names")
        if workers:
            sp.add_argument("--workers", type=int, default=default_workers(),
                            help="worker processes (default: available CPUs)")

    sp = sub.add_parser("build-tables", help="compute and save value tables")
    common(sp, policies=True)
    sp.set_defaults(func=cmd_build_tables)

    sp = sub.add_parser("bound-check", help="verify the bound sandwich on a small exact instance")
    common(sp)
    sp.add_argument("--scenarios", type=int, default=20, help="scenarios before symmetrisation")
    sp.add_argument("--n-max", type=int, default=5)
    sp.add_argument("--corrupt", type=float, default=0.0,
                    help="scale the per-bit increments by (1 + x); nonzero should fail")
    sp.set_defaults(func=cmd_bound_check)

    for name, func, help_ in (("simulate", cmd_simulate, "run episodes at the configured load"),
                              ("sweep", cmd_sweep, "run the configured parameter sweep")):
        sp = sub.add_parser(name, help=help_)
        common(sp, policies=True, workers=True)
        sp.set_defaults(func=func)

    sp = sub.add_parser("learn", help="train the value learner and report its error trajectory")
    common(sp)
    sp.set_defaults(func=cmd_learn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
