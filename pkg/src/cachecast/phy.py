"""Physical-layer math for STBC multicast under the high-SINR rate model.

A link is summarised by its log-SNR statistic ``theta``; the rate of a
segment sent with power ``P`` over ``N`` symbols is ``N * alpha * (theta +
log2 P)`` bits.  The closed-form optimum of ``(P + w) * N`` subject to that
rate reaching ``R`` bits is expressed through the principal Lambert-W branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class InfeasibleLinkError(ValueError):
    """Raised when a receiver cannot decode even at peak power."""


# kTB over a 20 MHz band: -174 dBm/Hz + 10 log10(2e7)
THERMAL_NOISE_DBM = -101.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class PhyConfig:
    num_antennas: int = 8
    stbc_rate: float = 0.5
    noise_power: float = dbm_to_watts(THERMAL_NOISE_DBM)
    interference: float = 0.0
    peak_power: float = dbm_to_watts(46.0)
    symbol_weight: float = 1.0
    # floor on the optimal power, relevant only for very strong links
    min_power_fraction: float = 1e-6

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if not 0.0 < self.stbc_rate <= 1.0:
            raise ValueError("stbc_rate must lie in (0, 1]")
        if self.noise_power <= 0 or self.peak_power <= 0:
            raise ValueError("noise_power and peak_power must be positive")
        if self.interference < 0 or self.symbol_weight < 0:
            raise ValueError("interference and symbol_weight must be nonnegative")
        if not 0.0 < self.min_power_fraction <= 1.0:
            raise ValueError("min_power_fraction must lie in (0, 1]")

    @property
    def min_power(self) -> float:
        return self.min_power_fraction * self.peak_power


@dataclass(frozen=True)
class LinkState:
    pathloss: float
    shadowing: float = 1.0
    interference: float | None = None  # None -> PhyConfig.interference

    def __post_init__(self):
        if self.pathloss <= 0 or self.shadowing <= 0:
            raise ValueError("pathloss and shadowing must be positive")
        if self.interference is not None and self.interference < 0:
            raise ValueError("interference must be nonnegative")


@dataclass(frozen=True)
class SegmentDemand:
    info_bits: float
    link: LinkState

    def __post_init__(self):
        if self.info_bits <= 0:
            raise ValueError("info_bits must be positive")


def lambert_w(x):
    """Principal branch of the Lambert-W function on ``[0, inf)``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("lambert_w is defined here for x >= 0 only")
    out = special.lambertw(arr, 0).real
    return float(out) if np.ndim(out) == 0 else out


def theta_from_gain(gain, cfg: PhyConfig, interference=None):
    """Expected ``log2(|h|^2 / (N_T (sigma^2 + I)))`` for Gamma(N_T, gain) power.

    Vectorised over ``gain`` (the product pathloss * shadowing).
    """
    i_pow = cfg.interference if interference is None else interference
    g = np.asarray(gain, dtype=float)
    val = (special.digamma(cfg.num_antennas) + np.log(g)
           - math.log(cfg.num_antennas * (cfg.noise_power + i_pow))) / math.log(2.0)
    return float(val) if np.ndim(val) == 0 else val


def theta(link: LinkState, cfg: PhyConfig) -> float:
    return theta_from_gain(link.pathloss * link.shadowing, cfg, link.interference)


def optimal_power_symbols(theta_val, info_bits, cfg: PhyConfig):
    """Vectorised closed form: returns ``(power, symbols)`` arrays.

    Symbols are real valued; callers round up at accounting time.
    """
    th = np.asarray(theta_val, dtype=float)
    if np.any(th + math.log2(cfg.peak_power) <= 0):
        raise InfeasibleLinkError("theta + log2(P_B) <= 0: segment undeliverable at peak power")
    w = cfg.symbol_weight
    if w > 0:
        # 2**th * w / e can overflow for very strong links; log-space argument
        # is not needed below ~1e300, so clip th defensively.
        lw = lambert_w(np.exp2(np.minimum(th, 1000.0)) * w / math.e)
        power = np.minimum(w / np.maximum(lw, 1e-300), cfg.peak_power)
    else:
        # w / W(2^theta w / e) -> e 2^-theta as w -> 0, since W(x) ~ x near 0
        power = math.e * np.exp2(-th)
    power = np.maximum(power, cfg.min_power)
    power = np.minimum(power, cfg.peak_power)
    symbols = info_bits / (cfg.stbc_rate * (th + np.log2(power)))
    if np.ndim(th) == 0:
        return float(power), float(symbols)
    return power, symbols


def optimal_tx(demand: SegmentDemand, cfg: PhyConfig) -> tuple[float, float]:
    """Optimal ``(power, symbols)`` to deliver one segment over ``demand.link``."""
    return optimal_power_symbols(theta(demand.link, cfg), demand.info_bits, cfg)


def min_cost(theta_val, info_bits, cfg: PhyConfig):
    """Weighted cost ``(P* + w) N*`` of reaching a receiver with statistic ``theta``."""
    p, n = optimal_power_symbols(theta_val, info_bits, cfg)
    return (p + cfg.symbol_weight) * n


def weighted_cost(power, symbols, cfg: PhyConfig):
    return (power + cfg.symbol_weight) * symbols


def rate(symbols, power, theta_val, cfg: PhyConfig):
    """High-SINR rate in bits for ``symbols`` symbols sent at ``power``."""
    return symbols * cfg.stbc_rate * (np.asarray(theta_val) + np.log2(power))


def decode_threshold_symbols(demand: SegmentDemand, power: float, cfg: PhyConfig) -> float:
    """Minimal (real) symbol count for the receiver of ``demand`` to decode at ``power``."""
    if not 0 < power <= cfg.peak_power:
        raise ValueError("power must lie in (0, P_B]")
    per_symbol = cfg.stbc_rate * (theta(demand.link, cfg) + math.log2(power))
    if per_symbol <= 0:
        raise InfeasibleLinkError("receiver cannot decode at this power")
    return demand.info_bits / per_symbol
