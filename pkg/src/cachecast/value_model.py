"""Reference-state value functions and the linear value approximation.

Two reference cache states carry all the information the scheduler needs:
``S*`` (every node holds every segment) and ``S^{i,s}`` (everything cached
except segment ``s`` at node ``i``).  Their stage-indexed values are stored
in a :class:`ValueTable`; any other cache state is valued by adding the
per-missing-bit increments ``v_one[i] - v_star`` to ``v_star``.

Expectations over the requesting user's position and the shadowing draws
are taken over a :class:`ScenarioSet`.  A sampled set gives Monte Carlo
estimates; a small set converted with :meth:`ScenarioSet.exact` turns every
number into a :class:`fractions.Fraction`, so the analytic evaluators and the
brute-force oracle in :mod:`cachecast.exact` agree to the last bit.
"""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import phy
from .phy import PhyConfig
from .topology import CellLayout, UserDistribution, coverage_regions, pathloss, sample_points
from .traffic import FileSpec, ShadowingModel, poisson_weights

TABLE_FORMAT = "cachecast-value-table v1"
# Poisson mass a table may drop beyond its last stage before mixtures are refused
MAX_TAIL_MASS = 1e-4


@dataclass(frozen=True)
class ScenarioSet:
    """Weighted request scenarios: region, per-receiver theta and serving cost.

    Shapes: ``weights`` (K,), ``region`` (K,) with -1 for no cache,
    ``theta_user``/``cost_user`` (K, S), ``theta_cache``/``cost_cache`` (K, C, S).
    ``S`` may be 1 when segments are i.i.d.; tables then rescale by the file's
    segment count.
    """
    weights: np.ndarray
    region: np.ndarray
    theta_user: np.ndarray
    theta_cache: np.ndarray
    cost_user: np.ndarray
    cost_cache: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def num_caches(self) -> int:
        return self.theta_cache.shape[1]

    @property
    def num_segments(self) -> int:
        return self.theta_user.shape[1]

    @property
    def is_exact(self) -> bool:
        return self.weights.dtype == object

    def exact(self) -> "ScenarioSet":
        """Copy with weights and costs as exact fractions (thetas stay float)."""
        k = self.size
        frac = np.vectorize(Fraction, otypes=[object])
        w = np.array([Fraction(1, k)] * k, dtype=object) if not self.is_exact else self.weights
        return replace(self, weights=w, cost_user=frac(self.cost_user),
                       cost_cache=frac(self.cost_cache))

    def symmetrized(self) -> "ScenarioSet":
        """Append every permutation of the segment axis so all segments share one marginal."""
        perms = list(itertools.permutations(range(self.num_segments)))
        cat = lambda a, ax: np.concatenate([np.take(a, p, axis=ax) for p in perms], axis=0)  # noqa: E731
        return ScenarioSet(
            weights=np.concatenate([self.weights] * len(perms)) / len(perms),
            region=np.concatenate([self.region] * len(perms)),
            theta_user=cat(self.theta_user, 1), theta_cache=cat(self.theta_cache, 2),
            cost_user=cat(self.cost_user, 1), cost_cache=cat(self.cost_cache, 2),
        )


def sample_scenarios(layout: CellLayout, dist: UserDistribution, shadowing: ShadowingModel,
                     cfg: PhyConfig, segment_bits: float, n: int, rng: np.random.Generator,
                     num_segments: int = 1) -> ScenarioSet:
    """Draw ``n`` equally weighted request scenarios."""
    pts = sample_points(dist, layout, rng, n)
    region = coverage_regions(pts, layout)
    pl_user = np.atleast_1d(pathloss(pts, np.asarray(layout.bs_position), layout.pathloss_exponent))
    pl_cache = layout.cache_pathloss()
    sh_user = shadowing.draw(rng, (n, num_segments))
    sh_cache = shadowing.draw(rng, (n, layout.num_caches, num_segments))
    th_u = phy.theta_from_gain(pl_user[:, None] * sh_user, cfg)
    th_c = phy.theta_from_gain(pl_cache[None, :, None] * sh_cache, cfg)
    th_u = np.asarray(th_u, dtype=float).reshape(n, num_segments)
    th_c = np.asarray(th_c, dtype=float).reshape(n, layout.num_caches, num_segments)
    return ScenarioSet(
        weights=np.full(n, 1.0 / n), region=region, theta_user=th_u, theta_cache=th_c,
        cost_user=np.asarray(phy.min_cost(th_u, segment_bits, cfg)).reshape(th_u.shape),
        cost_cache=np.asarray(phy.min_cost(th_c, segment_bits, cfg)).reshape(th_c.shape),
    )


@dataclass(frozen=True)
class CostBreakdown:
    energy: float
    symbols: float
    symbol_weight: float

    @property
    def weighted_total(self) -> float:
        return self.energy + self.symbol_weight * self.symbols


@dataclass
class ValueTable:
    """``v_star[N]`` and ``v_one[i, N]`` for N = 0..n_max (column 0 is zero)."""
    v_star: np.ndarray
    v_one: np.ndarray
    num_segments: int
    segment_bits: float
    v_star_stderr: np.ndarray | None = None
    v_one_stderr: np.ndarray | None = None
    meta: dict | None = None

    def __post_init__(self):
        if self.v_one.ndim != 2 or self.v_one.shape[1] != len(self.v_star):
            raise ValueError("v_one must have shape (num_caches, n_max + 1)")

    @property
    def n_max(self) -> int:
        return len(self.v_star) - 1

    @property
    def num_caches(self) -> int:
        return self.v_one.shape[0]

    @property
    def excess(self) -> np.ndarray:
        """Per-missing-bit increments ``v_one[i, N] - v_star[N]``."""
        return self.v_one - self.v_star[None, :]

    def check_stage(self, n: int):
        if not 0 <= n <= self.n_max:
            raise IndexError(f"stage count {n} outside table range 0..{self.n_max}")

    def weights(self, mean: float) -> np.ndarray:
        """Poisson weights over the table's stages; refuses means the table cannot cover."""
        w = poisson_weights(mean, self.n_max)
        if w.sum() < 1.0 - MAX_TAIL_MASS:
            raise ValueError(f"table with n_max={self.n_max} is too short for a mean of {mean:g} requests")
        return w

    def mixture(self, mean: float):
        """Poisson-mixed ``(v_star, excess)`` for a remaining-request mean ``mean``."""
        w = self.weights(mean)
        if self.v_star.dtype == object:
            w = np.array([Fraction(x) for x in w], dtype=object)
        return (w * self.v_star).sum(), (self.excess * w[None, :]).sum(axis=1)

    # -- flat-file format ---------------------------------------------------
    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TABLE_FORMAT}\n")
        buf.write(f"# num_caches={self.num_caches} num_segments={self.num_segments} "
                  f"segment_bits={float(self.segment_bits)!r}\n")
        for k, v in sorted((self.meta or {}).items()):
            buf.write(f"# meta {k}={v}\n")
        buf.write(",".join(["N", "v_star"] + [f"v_one_{i + 1}" for i in range(self.num_caches)]) + "\n")
        for n in range(self.n_max + 1):
            row = [str(n), repr(float(self.v_star[n]))]
            row += [repr(float(x)) for x in self.v_one[:, n]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "ValueTable":
        lines = text.splitlines()
        if not lines or lines[0].strip() != f"# {TABLE_FORMAT}":
            raise ValueError("not a cachecast value table (bad header)")
        hdr = dict(kv.split("=") for kv in lines[1][1:].split())
        meta = {}
        rows = []
        for line in lines[2:]:
            if line.startswith("# meta "):
                k, v = line[len("# meta "):].split("=", 1)
                meta[k] = v
            elif line.startswith("N,"):
                continue
            elif line.strip():
                rows.append([float(x) for x in line.split(",")])
        arr = np.array(rows)
        if arr.shape[1] != 2 + int(hdr["num_caches"]):
            raise ValueError("column count does not match num_caches")
        if not np.array_equal(arr[:, 0], np.arange(len(arr))):
            raise ValueError("stage column must run 0..n_max")
        return cls(v_star=arr[:, 1], v_one=arr[:, 2:].T.copy(),
                   num_segments=int(hdr["num_segments"]), segment_bits=float(hdr["segment_bits"]),
                   meta=meta or None)

    @classmethod
    def load(cls, path) -> "ValueTable":
        with open(path) as fh:
            return cls.loads(fh.read())


def _stage_sample_excess(sc: ScenarioSet, prev, s: int):
    """Per-scenario, per-node one-stage excess of state S^{i,s} given ``prev`` (C,)."""
    k, c = sc.size, sc.num_caches
    region = sc.region[:, None]
    nodes = np.arange(c)[None, :]
    cu = sc.cost_user[:, s][:, None]
    cc = sc.cost_cache[:, :, s]
    better = sc.theta_cache[:, :, s] >= sc.theta_user[:, s][:, None]
    prev_b = np.broadcast_to(prev[None, :], (k, c))
    in_own = region == nodes
    outside = region == -1
    own = np.where(better, cu, np.minimum(cu + prev_b, cc))
    free = np.where(better, 0 * cu, np.minimum(prev_b, cc - cu))
    return np.where(in_own, own, np.where(outside, free, prev_b))


def build_value_table(sc: ScenarioSet, n_max: int, num_segments: int,
                      segment_bits: float, meta: dict | None = None) -> ValueTable:
    """Evaluate ``v_star`` and ``v_one`` over a scenario set by backward recursion.

    ``v_star`` is linear in the stage count; ``v_one`` follows the
    two-branch recursion: when the node's link beats the user's it decodes
    for free, otherwise the cheaper of "serve the user only" and "also reach
    node i" is taken per scenario.
    """
    exact = sc.is_exact
    zero = Fraction(0) if exact else 0.0
    seg_scale = Fraction(num_segments, sc.num_segments) if exact else num_segments / sc.num_segments
    outside = (sc.region == -1).astype(int)
    per_req = sc.cost_user.sum(axis=1) * outside * seg_scale
    base = (sc.weights * per_req).sum()
    n_idx = np.arange(n_max + 1)
    v_star = np.array([base * int(n) for n in n_idx], dtype=object if exact else float)

    c = sc.num_caches
    excess = np.empty((c, n_max + 1), dtype=object if exact else float)
    excess[:, 0] = zero
    ex_var = np.zeros((c, n_max + 1))
    for n in range(1, n_max + 1):
        acc = None
        for s in range(sc.num_segments):
            e = _stage_sample_excess(sc, excess[:, n - 1], s)
            val = (sc.weights[:, None] * e).sum(axis=0)
            acc = val if acc is None else acc + val
            if not exact:
                ex_var[:, n] += e.var(axis=0) / sc.size / sc.num_segments ** 2
        excess[:, n] = acc / sc.num_segments
    v_one = v_star[None, :] + excess
    table = ValueTable(v_star=v_star, v_one=v_one, num_segments=num_segments,
                       segment_bits=segment_bits, meta=meta)
    if not exact:
        sd = (per_req.std() / np.sqrt(sc.size)) * n_idx
        table.v_star_stderr = sd
        table.v_one_stderr = np.sqrt(sd[None, :] ** 2 + ex_var)
    return table


def analytic_table(file: FileSpec, layout: CellLayout, dist: UserDistribution,
                   shadowing: ShadowingModel, cfg: PhyConfig, n_max: int, n_scenarios: int,
                   rng: np.random.Generator) -> ValueTable:
    """Monte Carlo ``ValueTable`` for a file under a known user distribution."""
    sc = sample_scenarios(layout, dist, shadowing, cfg, file.segment_bits, n_scenarios, rng)
    return build_value_table(sc, n_max, file.num_segments, file.segment_bits,
                             meta={"n_scenarios": n_scenarios, "distribution": dist.kind})


def v_star(n: int, table: ValueTable):
    table.check_stage(n)
    return table.v_star[n]


def v_one(i: int, n: int, table: ValueTable):
    table.check_stage(n)
    return table.v_one[i, n]


def _zeros_per_node(state) -> np.ndarray:
    b = np.asarray(state, dtype=bool)
    return (~b).sum(axis=1)


def approx_value(state, n: int, table: ValueTable):
    """Linear approximation: ``v_star[N]`` plus one increment per missing (node, segment)."""
    table.check_stage(n)
    z = _zeros_per_node(state)
    return table.v_star[n] + sum(int(z[i]) * table.excess[i, n] for i in range(len(z)) if z[i])


def approx_value_cross_file(state, n: int, table: ValueTable, file: FileSpec):
    """Value a cache state of ``file`` with a table built for another reference file."""
    table.check_stage(n)
    bits = file.segment_bits / table.segment_bits
    scale = file.num_segments * bits / table.num_segments
    z = _zeros_per_node(state)
    return scale * table.v_star[n] + bits * float(np.dot(z, table.excess[:, n].astype(float)))


def lower_bound(state, n: int, table: ValueTable):
    """``v_star[N]`` plus the single-stage increment for every missing bit."""
    table.check_stage(n)
    z = _zeros_per_node(state)
    if n == 0:
        return table.v_star[0]
    return table.v_star[n] + sum(int(z[i]) * table.excess[i, 1] for i in range(len(z)) if z[i])


@dataclass(frozen=True)
class SegmentChoice:
    candidate: int          # 0 = requesting user only, k>0 = k-th cache candidate
    target: int | None      # cache index whose link sizes the transmission
    target_theta: float
    cost: object
    future: object

    @property
    def total(self):
        return self.cost + self.future


def segment_choice(theta_u: float, cost_u, theta_c, cost_c, missing, delta) -> SegmentChoice:
    """Best threshold multicast for one segment.

    Candidates are the user alone, then each missing node whose link is worse
    than the user's, in order of decreasing link quality (fewest extra
    receivers first).  Targeting a node makes every node with an equal or
    better link decode too; ``delta[i]`` prices node ``i`` staying undecoded.
    Ties keep the earliest candidate.
    """
    worse = [i for i in range(len(theta_c)) if missing[i] and theta_c[i] < theta_u]
    worse.sort(key=lambda i: (-theta_c[i], i))
    # future cost if target threshold is t: nodes in `worse` with theta < t stay missing
    fut = sum((delta[i] for i in worse), 0 * cost_u)
    best = SegmentChoice(0, None, theta_u, cost_u, fut)
    for k, d in enumerate(worse, start=1):
        fut = fut - delta[d]
        # exact theta ties: the last of a tied group sees them all decoded at equal cost
        cand = SegmentChoice(k, d, theta_c[d], cost_c[d], fut)
        if cand.total < best.total:
            best = cand
    return best


def refined_upper(state, n: int, table: ValueTable, sc: ScenarioSet):
    """One Bellman backup over ``sc`` using the linear approximation as continuation value."""
    table.check_stage(n)
    if n == 0:
        return table.v_star[0]
    b = np.asarray(state, dtype=bool)
    c, nseg = b.shape
    if sc.num_segments != nseg or sc.num_caches != c:
        raise ValueError("scenario set shape does not match cache state")
    delta = table.excess[:, n - 1]
    total = table.v_star[n - 1]
    for k in range(sc.size):
        r = int(sc.region[k])
        acc = 0 * sc.weights[k]
        for s in range(nseg):
            missing = ~b[:, s]
            if r >= 0 and b[r, s]:
                acc = acc + sum((delta[i] for i in range(c) if missing[i]), 0 * delta[0])
                continue
            ch = segment_choice(sc.theta_user[k, s], sc.cost_user[k, s], sc.theta_cache[k, :, s],
                                sc.cost_cache[k, :, s], missing, delta)
            # nodes better than the user decode regardless and never enter `future`
            acc = acc + ch.total
        total = total + sc.weights[k] * acc
    return total


def bounds(state, n: int, table: ValueTable, sc: ScenarioSet | None = None):
    """``(lower, upper, refined_upper)``; refined is ``None`` without scenarios."""
    up = approx_value(state, n, table)
    lo = lower_bound(state, n, table)
    ref = refined_upper(state, n, table, sc) if sc is not None else None
    return lo, up, ref


def cost_to_go_lower_bound(state, remaining: float, file: FileSpec, table: ValueTable):
    """Poisson mixture of the stage-wise lower bound over the remaining lifetime."""
    if remaining < 0:
        raise ValueError("remaining lifetime must be nonnegative")
    w = table.weights(file.arrival_rate * remaining)
    bits = file.segment_bits / table.segment_bits
    scale = file.num_segments * bits / table.num_segments
    z = _zeros_per_node(state)
    inc = float(np.dot(z, table.excess[:, 1].astype(float))) if table.n_max >= 1 else 0.0
    vals = scale * table.v_star.astype(float) + bits * inc * (np.arange(table.n_max + 1) > 0)
    return float(np.dot(w, vals))


def remaining_cost_estimate(state, remaining: float, file: FileSpec, table: ValueTable):
    """Poisson mixture of the linear approximation: expected remaining cost of a file."""
    if remaining < 0:
        raise ValueError("remaining lifetime must be nonnegative")
    if remaining == 0 or file.arrival_rate == 0:
        return 0.0
    mix_star, mix_ex = table.mixture(file.arrival_rate * remaining)
    bits = file.segment_bits / table.segment_bits
    scale = file.num_segments * bits / table.num_segments
    z = _zeros_per_node(state)
    return float(scale * mix_star + bits * np.dot(z, mix_ex.astype(float)))
