"""Per-request multicast policies: the value-guided scheduler and two baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import phy
from .phy import PhyConfig
from .topology import CellLayout
from .traffic import FileSpec, RequestEvent
from .value_model import ValueTable, segment_choice

RATE_RTOL = 1e-9


@dataclass(frozen=True)
class EventLinks:
    """Theta and single-receiver serving cost for every receiver of one request."""
    region: int
    theta_user: np.ndarray   # (S,)
    theta_cache: np.ndarray  # (C, S)
    cost_user: np.ndarray
    cost_cache: np.ndarray

    @classmethod
    def from_event(cls, event: RequestEvent, layout: CellLayout, cfg: PhyConfig,
                   segment_bits: float) -> "EventLinks":
        th_u = np.atleast_1d(phy.theta_from_gain(event.user_pathloss * event.user_shadowing, cfg))
        th_c = phy.theta_from_gain(layout.cache_pathloss()[:, None] * event.cache_shadowing, cfg)
        th_c = np.asarray(th_c, dtype=float).reshape(event.cache_shadowing.shape)
        return cls(event.region, th_u, th_c,
                   np.atleast_1d(phy.min_cost(th_u, segment_bits, cfg)),
                   np.asarray(phy.min_cost(th_c, segment_bits, cfg)).reshape(th_c.shape))


@dataclass(frozen=True)
class SegmentDecision:
    segment: int
    power: float
    symbols: float
    receiving_caches: frozenset
    target: int | None = None     # cache sizing the transmission, None = the user

    def cost(self, cfg: PhyConfig) -> float:
        return phy.weighted_cost(self.power, self.symbols, cfg)


@dataclass(frozen=True)
class Decision:
    segments: tuple[SegmentDecision, ...] = ()

    def cost(self, cfg: PhyConfig) -> float:
        return sum(d.cost(cfg) for d in self.segments)


@dataclass
class SchedulerContext:
    state: np.ndarray            # (C, S) bool, mutated only by the engine
    remaining: float             # lifetime left after this request
    event: RequestEvent
    file: FileSpec
    links: EventLinks
    request_index: int = 0

    def __post_init__(self):
        if self.remaining < 0:
            raise ValueError("remaining lifetime must be nonnegative")


def demanded_segments(state, region: int | None) -> list[int]:
    """Segments the BS must send: all of them unless the user's cache holds some."""
    b = np.asarray(state, dtype=bool)
    if region is None or region < 0:
        return list(range(b.shape[1]))
    return [s for s in range(b.shape[1]) if not b[region, s]]


def _transmit(links: EventLinks, s: int, target_theta: float, target, cfg, bits) -> SegmentDecision:
    p, n = phy.optimal_power_symbols(target_theta, bits, cfg)
    rx = frozenset(int(c) for c in np.flatnonzero(links.theta_cache[:, s] >= target_theta))
    return SegmentDecision(s, p, n, rx, target)


def future_increments(table: ValueTable, file: FileSpec, remaining: float) -> np.ndarray:
    """Poisson-mixed cost of leaving each node without a segment, in this file's units."""
    if remaining <= 0 or file.arrival_rate == 0:
        return np.zeros(table.num_caches)
    _, ex = table.mixture(file.arrival_rate * remaining)
    return np.asarray(ex, dtype=float) * (file.segment_bits / table.segment_bits)


def schedule_segment(ctx: SchedulerContext, s: int, table: ValueTable, cfg: PhyConfig,
                     delta: np.ndarray | None = None) -> SegmentDecision:
    """Pick the cheapest threshold multicast for segment ``s`` including the mixed future cost."""
    if delta is None:
        delta = future_increments(table, ctx.file, ctx.remaining)
    L = ctx.links
    missing = ~np.asarray(ctx.state, dtype=bool)[:, s]
    ch = segment_choice(L.theta_user[s], L.cost_user[s], L.theta_cache[:, s], L.cost_cache[:, s],
                        missing, delta)
    return _transmit(L, s, ch.target_theta, ch.target, cfg, ctx.file.segment_bits)


class Policy:
    name = "policy"

    def decide(self, ctx: SchedulerContext, cfg: PhyConfig) -> Decision:
        raise NotImplementedError


@dataclass
class ProposedPolicy(Policy):
    table: ValueTable
    name: str = "proposed"

    def decide(self, ctx, cfg):
        segs = demanded_segments(ctx.state, ctx.links.region)
        if not segs:
            return Decision()
        delta = future_increments(self.table, ctx.file, ctx.remaining)
        return Decision(tuple(schedule_segment(ctx, s, self.table, cfg, delta) for s in segs))


@dataclass
class Baseline1(Policy):
    """Serve the requester at its own optimum; better-placed caches listen in."""
    name: str = "baseline1"

    def decide(self, ctx, cfg):
        L = ctx.links
        return Decision(tuple(_transmit(L, s, L.theta_user[s], None, cfg, ctx.file.segment_bits)
                              for s in demanded_segments(ctx.state, L.region)))


@dataclass
class Baseline2(Policy):
    """Fill every cache on a file's first request, then behave like baseline 1."""
    name: str = "baseline2"

    def decide(self, ctx, cfg):
        L = ctx.links
        if ctx.request_index > 0:
            return Baseline1().decide(ctx, cfg)
        out = []
        for s in demanded_segments(ctx.state, L.region):
            worst = int(np.argmin(L.theta_cache[:, s])) if L.theta_cache.shape[0] else None
            if worst is not None and L.theta_cache[worst, s] < L.theta_user[s]:
                out.append(_transmit(L, s, L.theta_cache[worst, s], worst, cfg, ctx.file.segment_bits))
            else:
                out.append(_transmit(L, s, L.theta_user[s], None, cfg, ctx.file.segment_bits))
        return Decision(tuple(out))


def make_policy(name: str, table: ValueTable | None = None) -> Policy:
    if name == "baseline1":
        return Baseline1()
    if name == "baseline2":
        return Baseline2()
    if name in ("proposed", "learned"):
        if table is None:
            raise ValueError(f"policy {name!r} needs a value table")
        return ProposedPolicy(table, name=name)
    raise ValueError(f"unknown policy {name!r}")


@dataclass
class ConstraintReport:
    ok: bool
    problems: list = field(default_factory=list)


def check_decision(decision: Decision, links: EventLinks, cfg: PhyConfig, bits: float,
                   must_serve_user: bool = True) -> ConstraintReport:
    """Independent check of the peak-power, requester and cache decoding constraints."""
    problems = []
    for d in decision.segments:
        if d.power > cfg.peak_power:
            problems.append((d.segment, "peak power exceeded"))
        floor = bits * (1.0 - RATE_RTOL)
        if must_serve_user and d.symbols * cfg.stbc_rate * (
                links.theta_user[d.segment] + math.log2(d.power)) < floor:
            problems.append((d.segment, "requesting user cannot decode"))
        for c in d.receiving_caches:
            if d.symbols * cfg.stbc_rate * (links.theta_cache[c, d.segment] + math.log2(d.power)) < floor:
                problems.append((d.segment, f"cache {c} listed but cannot decode"))
    return ConstraintReport(not problems, problems)
