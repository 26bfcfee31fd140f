"""Seeded Monte Carlo episodes over file lifetimes and parameter sweeps.

Seeding: every random stream is a child of ``SeedSequence(simulation.seed)``
addressed by a fixed spawn key, so results never depend on worker count or
on which policies are run together.

    (0,)        cache placement
    (1, k)      value-table scenarios (k = 0 true distribution, 1 uniform prior)
    (2,)        synthetic learner events
    (3, e)      episode e; its children are one request stream per file,
                followed by the proactive shadowing stream
    (4,)        scenarios for the exact bound check

Requests are drawn before any policy acts, so every policy sees the same
requests for the same episode seed (common random numbers).
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import phy
from .config import ConfigError, ExperimentConfig
from .learner import ValueLearner
from .phy import PhyConfig
from .proactive import ProactiveOpportunity, decide as proactive_decide
from .reactive import EventLinks, SchedulerContext, check_decision, make_policy
from .topology import CellLayout, UserDistribution
from .traffic import (FileSpec, ShadowingModel, generate_requests, synthetic_events,
                      truncation_horizon)
from .value_model import ValueTable, analytic_table, cost_to_go_lower_bound

PROACTIVE_SUFFIX = "+proactive"
BASE_POLICIES = ("proposed", "proposed-uniform", "learned", "baseline1", "baseline2")
REUSABLE_SWEEP_KEYS = ("load", "proactive.", "simulation.")


def seed_sequence(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(key))


def split_policy(name: str) -> tuple[str, bool]:
    base, pro = (name[:-len(PROACTIVE_SUFFIX)], True) if name.endswith(PROACTIVE_SUFFIX) else (name, False)
    if base not in BASE_POLICIES:
        raise ConfigError(f"unknown policy {name!r}")
    return base, pro


def table_kind(base: str, config: ExperimentConfig) -> str | None:
    if base == "proposed":
        return config.tables.assume
    if base == "proposed-uniform":
        return "uniform"
    if base == "learned":
        return "learned"
    return None


@dataclass
class Environment:
    """Everything an episode needs that does not change between seeds."""
    config: ExperimentConfig
    phy: PhyConfig
    layout: CellLayout
    dist: UserDistribution
    shadowing: ShadowingModel
    files: list[FileSpec]
    tables: dict[str, ValueTable] = field(default_factory=dict)

    @classmethod
    def build(cls, config: ExperimentConfig, policies=None, n_max: int | None = None,
              tables: dict | None = None) -> "Environment":
        config.validate()
        master = config.simulation.seed
        cfg = config.phy.build()
        layout = config.layout.build(np.random.default_rng(seed_sequence(master, 0)))
        dist = config.users.build(layout)
        env = cls(config, cfg, layout, dist, config.shadowing.build(), build_files(config))
        env.check_feasible()
        if n_max is None:
            n_max = truncation_horizon(max(f.load for f in env.files), config.tables.truncation_eps)
        kinds = {"true"}
        for name in policies or config.simulation.policies:
            kinds.add(table_kind(split_policy(name)[0], config) or "true")
        env.tables = dict(tables or {})
        for kind in sorted(kinds):
            if kind not in env.tables or env.tables[kind].n_max < n_max:
                env.tables[kind] = env.make_table(kind, n_max)
        return env

    def check_feasible(self):
        """The worst possible cache link must still support a positive rate at peak power."""
        floor = self.layout.cache_pathloss() * 10 ** (self.shadowing.floor_db / 10)
        th = np.atleast_1d(phy.theta_from_gain(floor, self.phy))
        if np.any(th + math.log2(self.phy.peak_power) <= 0):
            raise ConfigError("some cache node cannot decode even at peak power under worst shadowing")

    def reference_file(self) -> FileSpec:
        return self.files[0]

    def make_table(self, kind: str, n_max: int) -> ValueTable:
        ref = self.reference_file()
        n = self.config.tables.n_scenarios
        master = self.config.simulation.seed
        if kind == "true":
            rng = np.random.default_rng(seed_sequence(master, 1, 0))
            return analytic_table(ref, self.layout, self.dist, self.shadowing, self.phy, n_max, n, rng)
        uniform = UserDistribution("uniform")
        if kind == "uniform":
            rng = np.random.default_rng(seed_sequence(master, 1, 1))
            return analytic_table(ref, self.layout, uniform, self.shadowing, self.phy, n_max, n, rng)
        if kind == "learned":
            prior = self.tables.get("uniform") or self.make_table("uniform", n_max)
            learner = self.learner(prior)
            return learner.table()
        raise ConfigError(f"unknown table kind {kind!r}")

    def learner(self, prior: ValueTable, events: int | None = None) -> ValueLearner:
        """Train a learner on synthetic requests from the true user distribution."""
        lc = self.config.learning
        n = lc.events if events is None else events
        learner = ValueLearner(prior, self.layout, self.phy, tau=lc.tau)
        rng = np.random.default_rng(seed_sequence(self.config.simulation.seed, 2))
        ref = self.reference_file()
        for ev in synthetic_events(n, self.dist, self.layout, self.shadowing, rng, ref.num_segments):
            learner.observe(ev, ref)
        return learner

    def at(self, config: ExperimentConfig) -> "Environment":
        """Same geometry and tables, new config (only for load/proactive/simulation changes)."""
        env = replace(self, config=config, files=build_files(config))
        need = truncation_horizon(max(f.load for f in env.files), config.tables.truncation_eps)
        if min(t.n_max for t in env.tables.values()) < need:
            raise ConfigError("value tables are too short for this load; rebuild the environment")
        return env


def build_files(config: ExperimentConfig) -> list[FileSpec]:
    return [FileSpec(k, f.arrival_rate, f.lifetime, f.start_time, f.num_segments, f.segment_bits)
            for k, f in enumerate(config.files)]


@dataclass(frozen=True)
class LogRecord:
    time: float
    kind: str                  # "request" or "proactive"
    file_id: int
    region: int
    transmissions: tuple       # (segment, target, power, symbols, receivers)
    energy: float
    symbols: float


@dataclass
class Episode:
    seed: int
    policy: str
    log: list[LogRecord]
    states: list[np.ndarray]
    file_terms: dict[int, list[float]]     # per-file cost terms (energy and w * symbols)
    event_terms: list[float]               # the same terms in timeline order

    @property
    def total_cost(self) -> float:
        return math.fsum(self.event_terms)

    def file_cost(self, file_id: int) -> float:
        return math.fsum(self.file_terms.get(file_id, []))

    def rollup_cost(self) -> float:
        """Total from the per-file ledgers; equals :attr:`total_cost` exactly."""
        return math.fsum(t for k in sorted(self.file_terms) for t in self.file_terms[k])


def _timeline(env: Environment, seed: int, with_proactive: bool):
    ss = seed_sequence(env.config.simulation.seed, 3, seed)
    children = ss.spawn(len(env.files) + 1)
    items = []
    for f, child in zip(env.files, children):
        reqs = generate_requests(f, env.dist, env.layout, env.shadowing, np.random.default_rng(child))
        items += [(ev.arrival_time, 0, f.file_id, n, ev) for n, ev in enumerate(reqs)]
    opp_rng = np.random.default_rng(children[-1])
    period = env.config.proactive.period
    horizon = max(f.end_time for f in env.files)
    n_opp = max(int(math.ceil(horizon / period)) - 1, 0)   # opportunities at k * period < horizon
    shadows = env.shadowing.draw(opp_rng, (n_opp, env.layout.num_caches))
    if with_proactive:
        for k in range(n_opp):
            items.append(((k + 1) * period, 1, -1, k, shadows[k]))
    # reactive first on equal timestamps, then by file and index
    items.sort(key=lambda x: x[:4])
    return items


def run_episode(env: Environment, seed: int, policy: str) -> Episode:
    """Simulate every file's lifetime once under ``policy``; deterministic in (config, seed)."""
    base, pro_suffix = split_policy(policy)
    cfg = env.phy
    kind = table_kind(base, env.config)
    table = env.tables[kind] if kind else None
    sched = make_policy("proposed" if base == "proposed-uniform" else base, table)
    with_pro = pro_suffix or env.config.proactive.enabled
    pro_table = table or env.tables["true"]
    states = [np.zeros((env.layout.num_caches, f.num_segments), dtype=bool) for f in env.files]
    counts = [0] * len(env.files)
    log, event_terms = [], []
    file_terms: dict[int, list[float]] = {f.file_id: [] for f in env.files}
    cache_pl = env.layout.cache_pathloss()
    for t, kind_rank, fid, idx, payload in _timeline(env, seed, with_pro):
        if kind_rank == 0:
            f = env.files[fid]
            links = EventLinks.from_event(payload, env.layout, cfg, f.segment_bits)
            ctx = SchedulerContext(states[fid], max(f.end_time - t, 0.0), payload, f, links, counts[fid])
            dec = sched.decide(ctx, cfg)
            if env.config.simulation.validate:
                rep = check_decision(dec, links, cfg, f.segment_bits)
                if not rep.ok:
                    raise AssertionError(f"constraint violation at t={t}: {rep.problems}")
            counts[fid] += 1
            tx = []
            for d in dec.segments:
                states[fid][list(d.receiving_caches), d.segment] = True
                tx.append((d.segment, d.target, d.power, d.symbols, tuple(sorted(d.receiving_caches))))
            _book(log, event_terms, file_terms, cfg, t, "request", fid, payload.region, tx)
        else:
            theta = np.asarray(phy.theta_from_gain(cache_pl * payload, cfg), dtype=float)
            opp = ProactiveOpportunity(t, env.config.proactive.period, theta)
            dec = proactive_decide(opp, env.files, states, [pro_table] * len(env.files), cfg,
                                   env.config.proactive.tau_prime)
            if not dec.transmits:
                continue
            if env.config.simulation.validate:
                _check_proactive(dec, theta, cfg, env.files[dec.file_id].segment_bits)
            states[dec.file_id][list(dec.receiving_caches), dec.segment] = True
            tx = [(dec.segment, dec.target, dec.power, dec.symbols, tuple(sorted(dec.receiving_caches)))]
            _book(log, event_terms, file_terms, cfg, t, "proactive", dec.file_id, -1, tx)
    return Episode(seed, policy, log, states, file_terms, event_terms)


def _check_proactive(dec, theta, cfg: PhyConfig, bits: float):
    if dec.power > cfg.peak_power:
        raise AssertionError("proactive transmission exceeds peak power")
    for c in dec.receiving_caches:
        if phy.rate(dec.symbols, dec.power, theta[c], cfg) < bits * (1 - 1e-9):
            raise AssertionError(f"proactive receiver {c} cannot decode")


def _book(log, event_terms, file_terms, cfg, t, kind, fid, region, tx):
    # the optimiser works with real symbol counts; whole symbols are charged here
    tx = [(s, tgt, p, float(math.ceil(n)), rx) for s, tgt, p, n, rx in tx]
    energy = [p * n for _, _, p, n, _ in tx]
    sym = [n for _, _, _, n, _ in tx]
    terms = energy + [cfg.symbol_weight * n for n in sym]
    event_terms.extend(terms)
    file_terms[fid].extend(terms)
    log.append(LogRecord(t, kind, fid, region, tuple(tx), math.fsum(energy), math.fsum(sym)))


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepRow:
    sweep_param: float
    policy: str
    costs: np.ndarray          # (n_seeds,) episode totals
    file_costs: np.ndarray     # (n_seeds, n_files)

    @property
    def n_seeds(self) -> int:
        return len(self.costs)

    @property
    def mean_cost(self) -> float:
        return float(np.mean(self.costs))

    @property
    def stderr(self) -> float:
        n = len(self.costs)
        return float(np.std(self.costs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def paired_difference(a: SweepRow, b: SweepRow) -> tuple[float, float]:
    """Mean and standard error of ``a - b`` over shared seeds."""
    if a.n_seeds != b.n_seeds:
        raise ValueError("rows were run on different seed counts")
    d = a.costs - b.costs
    se = float(np.std(d, ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
    return float(d.mean()), se


def point_config(config: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "load":
        d = config.to_dict()
        for f in d["files"]:
            f["arrival_rate"] = float(value) / f["lifetime"]
        return ExperimentConfig.from_dict(d)
    return config.replace_path(parameter, value)


def _run_cell(args):
    env, seed, policies = args
    out = []
    for p in policies:
        ep = run_episode(env, seed, p)
        out.append((ep.total_cost, [ep.file_cost(f.file_id) for f in env.files]))
    return out


def sweep(config: ExperimentConfig, values=None, parameter: str | None = None,
          n_seeds: int | None = None, policies=None, workers: int = 1,
          env: Environment | None = None) -> list[SweepRow]:
    """Grid x seeds x policies; one :class:`SweepRow` per (grid value, policy)."""
    parameter = parameter or config.sweep.parameter
    values = list(config.sweep.values if values is None else values)
    n_seeds = n_seeds or config.simulation.n_seeds
    policies = list(policies or config.simulation.policies)
    for p in policies:
        split_policy(p)
    cfgs = [point_config(config, parameter, v) for v in values]
    reusable = any(parameter == k or parameter.startswith(k) for k in REUSABLE_SWEEP_KEYS)
    if reusable:
        n_max = max(truncation_horizon(max(f.arrival_rate * f.lifetime for f in c.files),
                                       c.tables.truncation_eps) for c in cfgs)
        env = Environment.build(config, policies, n_max=n_max,
                                tables=env.tables if env is not None else None)
        envs = [env.at(c) for c in cfgs]
    else:
        envs = [Environment.build(c, policies) for c in cfgs]
    jobs = [(e, s, policies) for e in envs for s in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = []
    for gi, v in enumerate(values):
        cell = results[gi * n_seeds:(gi + 1) * n_seeds]
        for pi, p in enumerate(policies):
            rows.append(SweepRow(float(v), p, np.array([c[pi][0] for c in cell]),
                                 np.array([c[pi][1] for c in cell])))
    return rows


def lower_bound_per_file(env: Environment) -> list[float]:
    """Cost-to-go lower bound of each file from the empty cache state at its start."""
    table = env.tables["true"]
    return [cost_to_go_lower_bound(np.zeros((env.layout.num_caches, f.num_segments), bool),
                                   f.lifetime, f, table) for f in env.files]


CSV_COLUMNS = ["sweep_param", "policy", "mean_cost", "stderr", "n_seeds"]


def write_rows(rows, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([repr(r.sweep_param), r.policy, repr(r.mean_cost), repr(r.stderr), r.n_seeds])


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
