"""Exact finite-horizon value iteration on a discretized instance.

Every cache state is enumerated as a bitmask and every joint action (one
transmission threshold per demanded segment) is tried in every scenario.
This is exponential and only meant as a test oracle for small instances.
"""
from __future__ import annotations

import itertools

import numpy as np

from .value_model import ScenarioSet

MAX_STATE_BITS = 12


class StateSpaceTooLarge(ValueError):
    pass


def bit(c: int, s: int, num_segments: int) -> int:
    return 1 << (c * num_segments + s)


def mask_to_state(mask: int, num_caches: int, num_segments: int) -> np.ndarray:
    return np.array([[bool(mask & bit(c, s, num_segments)) for s in range(num_segments)]
                     for c in range(num_caches)])


def state_to_mask(state) -> int:
    b = np.asarray(state, dtype=bool)
    nseg = b.shape[1]
    return sum(bit(c, s, nseg) for c, s in zip(*np.nonzero(b)))


def _segment_options(sc: ScenarioSet, k: int, s: int, mask: int):
    """(cost, newly decoded mask) pairs for segment ``s`` in scenario ``k``."""
    c_num, nseg = sc.num_caches, sc.num_segments
    r = int(sc.region[k])
    if r >= 0 and mask & bit(r, s, nseg):
        return [(0 * sc.cost_user[k, s], 0)]
    th_u = sc.theta_user[k, s]
    # any receiver the user can out-decode may size the transmission
    thresholds = [(th_u, sc.cost_user[k, s])]
    thresholds += [(sc.theta_cache[k, c, s], sc.cost_cache[k, c, s])
                   for c in range(c_num) if sc.theta_cache[k, c, s] < th_u]
    opts = []
    for th, cost in thresholds:
        dec = 0
        for c in range(c_num):
            if sc.theta_cache[k, c, s] >= th:
                dec |= bit(c, s, nseg)
        opts.append((cost, dec))
    return opts


def exact_value_iteration(sc: ScenarioSet, n_max: int) -> list[list]:
    """``V[N][mask]`` for N = 0..n_max over every cache state of the instance."""
    c_num, nseg = sc.num_caches, sc.num_segments
    nbits = c_num * nseg
    if nbits > MAX_STATE_BITS:
        raise StateSpaceTooLarge(f"2**{nbits} states exceeds the oracle limit 2**{MAX_STATE_BITS}")
    n_states = 1 << nbits
    zero = 0 * sc.weights[0]
    values = [[zero] * n_states]
    # options depend on (scenario, state) only; cache them across stages
    opts = [[[_segment_options(sc, k, s, m) for s in range(nseg)] for k in range(sc.size)]
            for m in range(n_states)]
    for _ in range(1, n_max + 1):
        prev = values[-1]
        cur = []
        for m in range(n_states):
            total = zero
            for k in range(sc.size):
                best = None
                for combo in itertools.product(*opts[m][k]):
                    cost = zero
                    nxt = m
                    for ccost, dec in combo:
                        cost = cost + ccost
                        nxt |= dec
                    val = cost + prev[nxt]
                    if best is None or val < best:
                        best = val
                total = total + sc.weights[k] * best
            cur.append(total)
        values.append(cur)
    return values
