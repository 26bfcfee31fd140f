"""Online estimation of the reference-state values from observed requests.

The estimates start from a table computed under a uniform user assumption.
Each observed request yields one counterfactual sample of the per-stage cost
for ``S*`` and for every ``S^{i,s}``, evaluated with that request's own
position and shadowing draws; the estimates are the running means of these
samples with the prior counted as the zeroth sample.  ``v_one`` samples
bootstrap from the current stage ``N - 1`` estimates, so the prior still
shapes the early trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import phy
from .phy import PhyConfig
from .topology import CellLayout
from .traffic import FileSpec, RequestEvent
from .value_model import ScenarioSet, ValueTable

DEFAULT_TAU_FRACTION = 1e-3


def event_scenario(event: RequestEvent, layout: CellLayout, cfg: PhyConfig,
                   segment_bits: float) -> ScenarioSet:
    """A single-scenario set holding one request's region, thetas and costs."""
    th_u = np.atleast_1d(phy.theta_from_gain(event.user_pathloss * event.user_shadowing, cfg))
    gains = layout.cache_pathloss()[:, None] * event.cache_shadowing
    th_c = np.asarray(phy.theta_from_gain(gains, cfg), dtype=float).reshape(gains.shape)
    return ScenarioSet(
        weights=np.ones(1), region=np.array([event.region]),
        theta_user=th_u[None, :], theta_cache=th_c[None, :, :],
        cost_user=np.asarray(phy.min_cost(th_u, segment_bits, cfg)).reshape(1, -1),
        cost_cache=np.asarray(phy.min_cost(th_c, segment_bits, cfg)).reshape(1, *th_c.shape),
    )


def _bootstrap_excess(sc: ScenarioSet, s: int, prev: np.ndarray) -> np.ndarray:
    """One-scenario excess sample for every node and stage; ``prev`` is (C, n_max)."""
    r = int(sc.region[0])
    cu = sc.cost_user[0, s]
    cc = sc.cost_cache[0, :, s][:, None]
    better = (sc.theta_cache[0, :, s] >= sc.theta_user[0, s])[:, None]
    out = prev.copy()
    if r < 0:
        out = np.where(better, 0.0, np.minimum(prev, cc - cu))
    else:
        out[r] = np.where(better[r], cu, np.minimum(cu + prev[r], cc[r]))
    return out


@dataclass
class ValueLearner:
    """Running-mean estimator of ``v_star[N]`` and ``v_one[i, N]``."""
    prior: ValueTable
    layout: CellLayout
    cfg: PhyConfig
    tau: float | None = None
    t: int = 0
    v_star: np.ndarray = field(init=False)
    excess: np.ndarray = field(init=False)
    last_change: float = field(init=False, default=math.inf)

    def __post_init__(self):
        if self.tau is None:
            self.tau = DEFAULT_TAU_FRACTION * float(self.prior.v_star[min(1, self.prior.n_max)])
        if not self.tau > 0:
            raise ValueError("convergence threshold tau must be positive")
        if self.prior.num_caches != self.layout.num_caches:
            raise ValueError("prior table and layout disagree on the number of caches")
        self.v_star = np.asarray(self.prior.v_star, dtype=float).copy()
        self.excess = np.asarray(self.prior.excess, dtype=float).copy()

    @property
    def n_max(self) -> int:
        return len(self.v_star) - 1

    def samples(self, event: RequestEvent, file: FileSpec):
        """One event's ``(v_star, excess)`` samples in the prior table's units."""
        # costs are linear in the segment size, so evaluating at the table's
        # size is the same as rescaling by the ratio of segment sizes
        sc = event_scenario(event, self.layout, self.cfg, self.prior.segment_bits)
        n_idx = np.arange(self.n_max + 1)
        per_stage = float(sc.cost_user[0].mean()) * self.prior.num_segments * (event.region < 0)
        star = per_stage * n_idx
        prev = self.excess[:, :-1]
        ex = np.zeros_like(self.excess)
        for s in range(sc.num_segments):
            ex[:, 1:] += _bootstrap_excess(sc, s, prev)
        ex /= sc.num_segments
        return star, ex

    def observe(self, event: RequestEvent, file: FileSpec) -> float:
        """Fold one request into the running means; returns the largest change."""
        star, ex = self.samples(event, file)
        self.t += 1
        # the prior counts as sample 0, so event t gets weight 1 / (t + 1)
        d_star = (star - self.v_star) / (self.t + 1)
        d_ex = (ex - self.excess) / (self.t + 1)
        self.v_star += d_star
        self.excess += d_ex
        # v_one = v_star + excess, so its change is the sum of both
        self.last_change = float(max(np.abs(d_star).max(), np.abs(d_star[None, :] + d_ex).max()))
        return self.last_change

    def converged(self) -> bool:
        return self.t > 0 and self.last_change <= self.tau

    def table(self) -> ValueTable:
        meta = dict(self.prior.meta or {})
        meta.update({"learned_events": self.t, "distribution": "learned"})
        return ValueTable(v_star=self.v_star.copy(), v_one=self.v_star[None, :] + self.excess,
                          num_segments=self.prior.num_segments,
                          segment_bits=self.prior.segment_bits, meta=meta)
