"""Experiment configuration: strict YAML <-> nested dataclasses.

Powers are given in dBm and converted to watts once, in :meth:`PhySection.build`.
Unknown keys anywhere in the file are rejected.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .phy import THERMAL_NOISE_DBM, PhyConfig, dbm_to_watts
from .topology import CacheNode, CellLayout, HotZone, UserDistribution, place_caches_on_annulus
from .traffic import FileSpec, ShadowingModel


class ConfigError(ValueError):
    pass


@dataclass
class PhySection:
    num_antennas: int = 8
    stbc_rate: float = 0.5
    noise_dbm: float = THERMAL_NOISE_DBM
    interference_dbm: float | None = None
    peak_power_dbm: float = 46.0
    symbol_weight: float = 1.0

    def build(self) -> PhyConfig:
        interf = 0.0 if self.interference_dbm is None else dbm_to_watts(self.interference_dbm)
        return PhyConfig(num_antennas=self.num_antennas, stbc_rate=self.stbc_rate,
                         noise_power=dbm_to_watts(self.noise_dbm), interference=interf,
                         peak_power=dbm_to_watts(self.peak_power_dbm),
                         symbol_weight=self.symbol_weight)


@dataclass
class LayoutSection:
    cell_radius: float = 500.0
    num_caches: int = 20
    cache_radius: float = 90.0
    annulus_inner: float = 200.0
    annulus_outer: float = 500.0
    pathloss_exponent: float = 3.5
    positions: list[list[float]] | None = None   # fixed centres override random placement

    def build(self, rng: np.random.Generator) -> CellLayout:
        if self.positions is not None:
            nodes = [CacheNode((float(p[0]), float(p[1])), self.cache_radius) for p in self.positions]
        else:
            nodes = place_caches_on_annulus(self.num_caches, self.cache_radius, self.cell_radius,
                                            self.annulus_inner, self.annulus_outer, rng)
        return CellLayout(self.cell_radius, tuple(nodes), self.pathloss_exponent)


@dataclass
class HotZoneSection:
    mass: float
    radius: float | None = None            # defaults to the cache service radius
    center: list[float] | None = None
    at_cache: int | None = None            # centre the zone on this cache node

    def build(self, layout: CellLayout) -> HotZone:
        if (self.center is None) == (self.at_cache is None):
            raise ConfigError("hot zone needs exactly one of 'center' or 'at_cache'")
        if self.at_cache is not None:
            if not 0 <= self.at_cache < layout.num_caches:
                raise ConfigError(f"at_cache {self.at_cache} out of range")
            node = layout.cache_nodes[self.at_cache]
            centre, radius = node.position, node.service_radius
        else:
            centre, radius = (float(self.center[0]), float(self.center[1])), None
        r = self.radius if self.radius is not None else radius
        if r is None:
            raise ConfigError("hot zone with explicit centre needs a radius")
        return HotZone(tuple(centre), float(r), self.mass)


@dataclass
class UsersSection:
    kind: str = "uniform"
    hotzones: list[HotZoneSection] = field(default_factory=list)

    def build(self, layout: CellLayout) -> UserDistribution:
        return UserDistribution(self.kind, tuple(z.build(layout) for z in self.hotzones))


@dataclass
class ShadowingSection:
    sigma_db: float = 8.0
    clip_sigmas: float = 3.0

    def build(self) -> ShadowingModel:
        return ShadowingModel(self.sigma_db, self.clip_sigmas)


@dataclass
class FileSection:
    arrival_rate: float = 0.01
    lifetime: float = 1000.0
    start_time: float = 0.0
    num_segments: int = 1
    segment_bits: float = 14e6


@dataclass
class TablesSection:
    n_scenarios: int = 100_000
    truncation_eps: float = 1e-6
    assume: str = "true"                  # "true" or "uniform" user distribution for 'proposed'


@dataclass
class LearningSection:
    events: int = 10_000
    tau: float | None = None              # None = 0.1% of the prior v_star[1]
    prior_scenarios: int | None = None    # None = tables.n_scenarios


@dataclass
class ProactiveSection:
    enabled: bool = False
    period: float = 50.0
    tau_prime: float = 1.1


@dataclass
class SimulationSection:
    seed: int = 0
    n_seeds: int = 20
    policies: list[str] = field(default_factory=lambda: ["proposed", "baseline1", "baseline2"])
    validate: bool = True


@dataclass
class SweepSection:
    parameter: str = "load"               # "load" sets every file's arrival_rate * lifetime
    values: list[float] = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 20.0])


@dataclass
class OutputSection:
    dir: str = "results"
    event_log: bool = False


@dataclass
class ExperimentConfig:
    phy: PhySection = field(default_factory=PhySection)
    layout: LayoutSection = field(default_factory=LayoutSection)
    users: UsersSection = field(default_factory=UsersSection)
    shadowing: ShadowingSection = field(default_factory=ShadowingSection)
    files: list[FileSection] = field(default_factory=lambda: [FileSection()])
    tables: TablesSection = field(default_factory=TablesSection)
    learning: LearningSection = field(default_factory=LearningSection)
    proactive: ProactiveSection = field(default_factory=ProactiveSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def validate(self):
        """Cheap structural checks; physics checks happen when objects are built."""
        if not self.files:
            raise ConfigError("file catalog is empty")
        for f in self.files:
            FileSpec(0, f.arrival_rate, f.lifetime, f.start_time, f.num_segments, f.segment_bits)
        if self.tables.assume not in ("true", "uniform"):
            raise ConfigError("tables.assume must be 'true' or 'uniform'")
        if not 0 < self.tables.truncation_eps < 1:
            raise ConfigError("tables.truncation_eps must lie in (0, 1)")
        if self.tables.n_scenarios < 1 or self.simulation.n_seeds < 1:
            raise ConfigError("n_scenarios and n_seeds must be positive")
        if self.learning.tau is not None and not self.learning.tau > 0:
            raise ConfigError("learning.tau must be positive")
        if not self.proactive.period > 0:
            raise ConfigError("proactive.period must be positive")
        if not self.proactive.tau_prime > 1:
            raise ConfigError("proactive.tau_prime must exceed 1")
        if self.users.kind == "uniform" and self.users.hotzones:
            raise ConfigError("uniform users take no hot zones")
        self.phy.build()
        self.shadowing.build()
        return self

    # -- (de)serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _coerce(cls, data or {}, "config").validate()

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.loads(fh.read())

    def replace_path(self, dotted: str, value) -> "ExperimentConfig":
        """Copy with one dotted key overwritten, e.g. ``proactive.period``."""
        d = self.to_dict()
        node = d
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node[keys[-1]] = value
        return ExperimentConfig.from_dict(d)


def _coerce(tp, value, where: str):
    """Convert plain YAML data into ``tp``, rejecting unknown keys and wrong kinds."""
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp)}
        unknown = set(value) - names
        if unknown:
            raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
        try:
            return tp(**{k: _coerce(hints[k], v, f"{where}.{k}") for k, v in value.items()})
        except TypeError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return [_coerce(args[0], v, f"{where}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported type {tp}")
