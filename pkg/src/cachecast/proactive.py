"""Periodic proactive multicast to cache nodes between requests.

At each opportunity the BS looks at every live file and every segment some
node is still missing, and for each gain-threshold receiving set computes

    gain = g(S) / (cost + g(S'))

where ``g`` is the Poisson-mixed linear value estimate of the file's
remaining cost and ``S'`` the state after the transmission.  The best
triple is sent when its gain reaches ``tau_prime``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import phy
from .phy import PhyConfig
from .traffic import FileSpec
from .value_model import ValueTable, remaining_cost_estimate

__all__ = ["ProactiveOpportunity", "ProactiveDecision", "remaining_cost_estimate",
           "evaluate_candidate", "decide"]


@dataclass(frozen=True)
class ProactiveOpportunity:
    time: float
    period: float
    theta_cache: np.ndarray    # (C,) theta of each node under this opportunity's shadowing

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("proactive period must be positive")


@dataclass(frozen=True)
class ProactiveDecision:
    file_id: int | None = None
    segment: int | None = None
    target: int | None = None
    power: float = 0.0
    symbols: float = 0.0
    receiving_caches: frozenset = frozenset()
    gain: float = 0.0

    @property
    def transmits(self) -> bool:
        return self.file_id is not None

    def cost(self, cfg: PhyConfig) -> float:
        return phy.weighted_cost(self.power, self.symbols, cfg) if self.transmits else 0.0


def evaluate_candidate(file: FileSpec, segment: int, state, remaining: float,
                       opp: ProactiveOpportunity, table: ValueTable,
                       cfg: PhyConfig) -> tuple[float, ProactiveDecision]:
    """Best gain ratio over gain-threshold receiving sets for one (file, segment)."""
    b = np.asarray(state, dtype=bool)
    missing = ~b[:, segment]
    none = (0.0, ProactiveDecision())
    if not missing.any():
        return none
    before = remaining_cost_estimate(b, remaining, file, table)
    if before <= 0:
        return none
    th = np.asarray(opp.theta_cache, dtype=float)
    targets = np.flatnonzero(missing & (th + np.log2(cfg.peak_power) > 0))
    if len(targets) == 0:
        return none
    # each missing node decoded by the transmission removes its mixed increment
    _, mix_ex = table.mixture(file.arrival_rate * remaining)
    saved = np.asarray(mix_ex, dtype=float) * (file.segment_bits / table.segment_bits) * missing
    rx = th[None, :] >= th[targets][:, None]                  # (targets, C)
    after = before - rx.astype(float) @ saved
    power, symbols = phy.optimal_power_symbols(th[targets], file.segment_bits, cfg)
    power, symbols = np.atleast_1d(power), np.atleast_1d(symbols)
    ratio = before / (phy.weighted_cost(power, symbols, cfg) + after)
    k = int(np.argmax(ratio))          # first maximum = lowest node index among ties
    return float(ratio[k]), ProactiveDecision(
        file.file_id, segment, int(targets[k]), float(power[k]), float(symbols[k]),
        frozenset(int(c) for c in np.flatnonzero(rx[k])), float(ratio[k]))


def decide(opp: ProactiveOpportunity, files, states, tables, cfg: PhyConfig,
           tau_prime: float = 1.1) -> ProactiveDecision:
    """Argmax over live (file, segment, target); transmit only if the gain reaches ``tau_prime``.

    ``files``, ``states`` and ``tables`` are parallel sequences; files outside
    their lifetime at ``opp.time`` are skipped.
    """
    if not tau_prime > 1:
        raise ValueError("tau_prime must exceed 1")
    best = ProactiveDecision()
    for f, st, tab in zip(files, states, tables):
        if not f.start_time <= opp.time < f.end_time:
            continue
        remaining = f.end_time - opp.time
        for s in range(np.asarray(st).shape[1]):
            g, dec = evaluate_candidate(f, s, st, remaining, opp, tab, cfg)
            if dec.transmits and g > best.gain:
                best = dec
    return best if best.transmits and best.gain >= tau_prime else ProactiveDecision()
