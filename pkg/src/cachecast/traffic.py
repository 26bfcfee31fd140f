"""File catalog, Poisson request streams and log-normal shadowing draws."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .topology import CellLayout, UserDistribution, coverage_regions, pathloss, sample_points


@dataclass(frozen=True)
class FileSpec:
    file_id: int
    arrival_rate: float
    lifetime: float
    start_time: float = 0.0
    num_segments: int = 1
    segment_bits: float = 14e6

    def __post_init__(self):
        if self.arrival_rate < 0 or self.lifetime <= 0:
            raise ValueError("arrival_rate must be >= 0 and lifetime > 0")
        if self.num_segments < 1 or self.segment_bits <= 0:
            raise ValueError("num_segments must be >= 1 and segment_bits > 0")

    @property
    def load(self) -> float:
        """Expected number of requests over the lifetime."""
        return self.arrival_rate * self.lifetime

    @property
    def end_time(self) -> float:
        return self.start_time + self.lifetime


@dataclass(frozen=True)
class ShadowingModel:
    """I.i.d. log-normal shadowing truncated at ``clip_sigmas`` standard deviations."""
    sigma_db: float = 8.0
    clip_sigmas: float = 3.0

    def __post_init__(self):
        if self.sigma_db < 0 or self.clip_sigmas <= 0:
            raise ValueError("sigma_db must be >= 0 and clip_sigmas > 0")

    @property
    def floor_db(self) -> float:
        return -self.clip_sigmas * self.sigma_db

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        z = np.clip(rng.standard_normal(shape), -self.clip_sigmas, self.clip_sigmas)
        return 10.0 ** (self.sigma_db * z / 10.0)


@dataclass(frozen=True)
class RequestEvent:
    """One request: who asked, where, and the large-scale gains of this transmission."""
    file_id: int
    arrival_time: float
    point: tuple[float, float]
    serving_cache: int | None
    user_pathloss: float
    user_shadowing: np.ndarray     # (num_segments,)
    cache_shadowing: np.ndarray    # (num_caches, num_segments)

    @property
    def region(self) -> int:
        return -1 if self.serving_cache is None else self.serving_cache


def poisson_pmf(mean: float, n):
    """Poisson probability mass, evaluated in the log domain."""
    if mean < 0:
        raise ValueError("mean must be nonnegative")
    n_arr = np.asarray(n)
    if mean == 0:
        out = (n_arr == 0).astype(float)
    else:
        out = np.exp(n_arr * math.log(mean) - mean - special.gammaln(n_arr + 1))
    return float(out) if np.ndim(out) == 0 else out


def truncation_horizon(mean: float, eps: float = 1e-6) -> int:
    """Smallest ``n_max`` with Poisson tail mass beyond ``n_max`` below ``eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if mean == 0:
        return 0
    n = int(stats.poisson.ppf(1.0 - eps, mean))
    while stats.poisson.sf(n, mean) >= eps:
        n += 1
    while n > 0 and stats.poisson.sf(n - 1, mean) < eps:
        n -= 1
    return n


def poisson_weights(mean: float, n_max: int) -> np.ndarray:
    """pmf(0..n_max) for a remaining-request count."""
    return poisson_pmf(mean, np.arange(n_max + 1))


def generate_requests(spec: FileSpec, dist: UserDistribution, layout: CellLayout,
                      shadowing: ShadowingModel, rng: np.random.Generator) -> list[RequestEvent]:
    """Requests of one file over its lifetime, sorted by arrival time."""
    count = int(rng.poisson(spec.load)) if spec.load > 0 else 0
    if count == 0:
        return []
    times = np.sort(rng.uniform(spec.start_time, spec.end_time, count))
    pts = sample_points(dist, layout, rng, count)
    regions = coverage_regions(pts, layout)
    pl = pathloss(pts, np.asarray(layout.bs_position), layout.pathloss_exponent)
    pl = np.atleast_1d(pl)
    s = spec.num_segments
    user_sh = shadowing.draw(rng, (count, s))
    cache_sh = shadowing.draw(rng, (count, layout.num_caches, s))
    return [
        RequestEvent(spec.file_id, float(times[k]), (float(pts[k, 0]), float(pts[k, 1])),
                     None if regions[k] < 0 else int(regions[k]), float(pl[k]),
                     user_sh[k], cache_sh[k])
        for k in range(count)
    ]


def synthetic_events(n: int, dist: UserDistribution, layout: CellLayout, shadowing: ShadowingModel,
                     rng: np.random.Generator, num_segments: int = 1,
                     file_id: int = 0) -> list[RequestEvent]:
    """Exactly ``n`` i.i.d. requests at unit spacing, for training the value learner."""
    spec = FileSpec(file_id, arrival_rate=1.0, lifetime=max(n, 1), num_segments=num_segments)
    pts = sample_points(dist, layout, rng, n)
    regions = coverage_regions(pts, layout)
    pl = np.atleast_1d(pathloss(pts, np.asarray(layout.bs_position), layout.pathloss_exponent))
    user_sh = shadowing.draw(rng, (n, spec.num_segments))
    cache_sh = shadowing.draw(rng, (n, layout.num_caches, spec.num_segments))
    return [
        RequestEvent(file_id, float(k), (float(pts[k, 0]), float(pts[k, 1])),
                     None if regions[k] < 0 else int(regions[k]), float(pl[k]),
                     user_sh[k], cache_sh[k])
        for k in range(n)
    ]
