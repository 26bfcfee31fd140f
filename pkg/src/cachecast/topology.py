"""Cell geometry: cache-node disks, user location sampling and pathloss."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REFERENCE_DISTANCE = 1.0  # metres


@dataclass(frozen=True)
class CacheNode:
    position: tuple[float, float]
    service_radius: float


@dataclass(frozen=True)
class CellLayout:
    cell_radius: float
    cache_nodes: tuple[CacheNode, ...]
    pathloss_exponent: float = 3.5
    bs_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.cell_radius <= 0:
            raise ValueError("cell_radius must be positive")
        for node in self.cache_nodes:
            if node.service_radius <= 0:
                raise ValueError("service_radius must be positive")
            if math.dist(node.position, self.bs_position) > self.cell_radius:
                raise ValueError(f"cache node at {node.position} lies outside the cell")
        pos = self.positions
        rad = self.radii
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if np.hypot(*(pos[i] - pos[j])) < rad[i] + rad[j]:
                    raise ValueError(f"cache disks {i} and {j} overlap")

    @property
    def num_caches(self) -> int:
        return len(self.cache_nodes)

    @property
    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.cache_nodes], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([n.service_radius for n in self.cache_nodes], dtype=float)

    def cache_pathloss(self) -> np.ndarray:
        return pathloss(self.positions, np.asarray(self.bs_position), self.pathloss_exponent)


def place_caches_on_annulus(num_caches: int, service_radius: float, cell_radius: float,
                            inner: float, outer: float, rng: np.random.Generator,
                            max_tries: int = 20000, max_restarts: int = 200) -> list[CacheNode]:
    """Random sequential placement of disjoint disks with centres on an annulus.

    Centres are uniform in area over ``inner <= r <= outer``; a placement that
    jams is restarted from scratch.
    """
    outer = min(outer, cell_radius)
    if not 0 <= inner < outer:
        raise ValueError("annulus must satisfy 0 <= inner < outer")
    for _ in range(max_restarts):
        centres: list[np.ndarray] = []
        tries = 0
        while len(centres) < num_caches and tries < max_tries:
            tries += 1
            r = math.sqrt(rng.uniform(inner ** 2, outer ** 2))
            phi = rng.uniform(0.0, 2.0 * math.pi)
            p = np.array([r * math.cos(phi), r * math.sin(phi)])
            if all(np.hypot(*(p - q)) >= 2 * service_radius for q in centres):
                centres.append(p)
        if len(centres) == num_caches:
            return [CacheNode((float(p[0]), float(p[1])), service_radius) for p in centres]
    raise RuntimeError(f"could not place {num_caches} disjoint caches on the annulus")


@dataclass(frozen=True)
class HotZone:
    center: tuple[float, float]
    radius: float
    mass: float


@dataclass(frozen=True)
class UserDistribution:
    """Uniform background plus optional uniform-disk hot zones."""
    kind: str = "uniform"
    hotzones: tuple[HotZone, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "hotzone"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "uniform" and self.hotzones:
            raise ValueError("uniform distribution takes no hot zones")
        total = sum(z.mass for z in self.hotzones)
        if any(z.mass < 0 for z in self.hotzones) or total > 1.0 + 1e-12:
            raise ValueError("hot-zone masses must be nonnegative and sum to at most 1")

    @property
    def background_mass(self) -> float:
        return max(0.0, 1.0 - sum(z.mass for z in self.hotzones))


@dataclass(frozen=True)
class UserLocation:
    point: tuple[float, float]
    serving_cache: int | None


def pathloss(point_a, point_b, exponent: float):
    """Power-law gain ``(d / d0) ** -exponent``; distances below d0 are clamped."""
    d = np.hypot(*np.moveaxis(np.asarray(point_a, float) - np.asarray(point_b, float), -1, 0))
    d = np.maximum(d, REFERENCE_DISTANCE)
    g = (d / REFERENCE_DISTANCE) ** (-exponent)
    return float(g) if np.ndim(g) == 0 else g


def coverage_regions(points, layout: CellLayout) -> np.ndarray:
    """Serving cache index per point, -1 when outside every disk (boundary counts inside)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.full(len(pts), -1, dtype=int)
    if layout.num_caches == 0:
        return out
    d = np.hypot(*np.moveaxis(pts[:, None, :] - layout.positions[None, :, :], -1, 0))
    inside = d <= layout.radii[None, :]
    hit = inside.any(axis=1)
    out[hit] = inside[hit].argmax(axis=1)
    return out


def coverage_region_of(point, layout: CellLayout) -> int | None:
    c = int(coverage_regions(point, layout)[0])
    return None if c < 0 else c


def _uniform_disk(rng, n, center, radius):
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)])


def sample_points(dist: UserDistribution, layout: CellLayout, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. user positions; hot-zone draws are clipped to the cell by rejection."""
    if dist.kind == "uniform":
        return _uniform_disk(rng, n, layout.bs_position, layout.cell_radius)
    masses = np.array([dist.background_mass] + [z.mass for z in dist.hotzones])
    comp = rng.choice(len(masses), size=n, p=masses / masses.sum())
    pts = np.empty((n, 2))
    bs = np.asarray(layout.bs_position)
    for k in range(len(masses)):
        idx = np.flatnonzero(comp == k)
        filled = 0
        while filled < len(idx):
            m = len(idx) - filled
            if k == 0:
                cand = _uniform_disk(rng, m, layout.bs_position, layout.cell_radius)
            else:
                z = dist.hotzones[k - 1]
                cand = _uniform_disk(rng, m, z.center, z.radius)
                cand = cand[np.hypot(*(cand - bs).T) <= layout.cell_radius]
            pts[idx[filled:filled + len(cand)]] = cand
            filled += len(cand)
    return pts


def sample_user(dist: UserDistribution, layout: CellLayout, rng: np.random.Generator) -> UserLocation:
    p = sample_points(dist, layout, rng, 1)[0]
    return UserLocation((float(p[0]), float(p[1])), coverage_region_of(p, layout))


def disk_intersection_area(r1: float, r2: float, d: float) -> float:
    """Area of the lens shared by two disks of radii r1, r2 whose centres are d apart."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 ** 2 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 ** 2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    k = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - k


def uniform_coverage_probability(layout: CellLayout) -> np.ndarray:
    """Probability that a uniform user falls in each cache disk (clipped to the cell)."""
    cell_area = math.pi * layout.cell_radius ** 2
    bs = np.asarray(layout.bs_position)
    return np.array([
        disk_intersection_area(layout.cell_radius, n.service_radius,
                               float(np.hypot(*(np.asarray(n.position) - bs)))) / cell_area
        for n in layout.cache_nodes
    ])
