"""Shared helpers for the experiment scripts."""
import argparse
import csv
import os

from cachecast import sim
from cachecast.config import ExperimentConfig

CONFIGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "configs")


def parser(description: str, config: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", default=os.path.join(CONFIGS, config))
    p.add_argument("--seeds", type=int, help="override simulation.n_seeds")
    p.add_argument("--workers", type=int, default=sim.default_workers())
    p.add_argument("--out", default="results")
    return p


def load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.seeds:
        cfg = cfg.replace_path("simulation.n_seeds", args.seeds)
    return cfg


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"-> {path}")
