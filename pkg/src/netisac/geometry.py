"""Line-of-sight geometry for ground base stations with uniform linear arrays.

Angles are carried as cosines throughout; the arccos is never taken because
only the cosine enters the steering phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Orientation = Literal["horizontal", "vertical"]

# horizontal array axis (x)
PSI = np.array([1.0, 0.0])


@dataclass(frozen=True)
class GbsSite:
    id: int
    u: tuple[float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.u)):
            raise ValueError(f"GBS {self.id} position must be finite, got {self.u}")


@dataclass(frozen=True)
class AirPoint:
    horizontal: tuple[float, float]
    altitude: float

    def __post_init__(self):
        if not self.altitude > 0:
            raise ValueError(f"altitude must be > 0, got {self.altitude}")


@dataclass(frozen=True)
class ArrayConfig:
    n_antennas: int = 4
    spacing_over_wavelength: float = 0.5
    orientation: Orientation = "horizontal"

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ValueError("spacing_over_wavelength must be > 0")
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"unknown orientation {self.orientation!r}")


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    gbs_id: int
    target: AirPoint


def _offset(u, q) -> np.ndarray:
    return np.asarray(q, dtype=float) - np.asarray(u, dtype=float)


def aod_cosine_xy(orientation: Orientation, u, q, altitude: float) -> float:
    """Cosine of the departure angle from a GBS at ``u`` to ``(q, altitude)``."""
    delta = _offset(u, q)
    dist = np.sqrt(delta @ delta + altitude**2)
    if orientation == "horizontal":
        return float(PSI @ delta / dist)
    return float(altitude / dist)


def aod_cosine(orientation: Orientation, gbs: GbsSite, point: AirPoint) -> float:
    return aod_cosine_xy(orientation, gbs.u, point.horizontal, point.altitude)


def steering_vector(cos_theta: float, cfg: ArrayConfig) -> np.ndarray:
    r = np.arange(cfg.n_antennas)
    return np.exp(1j * 2 * np.pi * cfg.spacing_over_wavelength * r * cos_theta)


def distance_sq(u, q, altitude: float) -> float:
    delta = _offset(u, q)
    return float(delta @ delta + altitude**2)


def channel_xy(u, q, altitude: float, cfg: ArrayConfig, kappa: float) -> np.ndarray:
    cos_theta = aod_cosine_xy(cfg.orientation, u, q, altitude)
    gain = np.sqrt(kappa / distance_sq(u, q, altitude))
    return gain * steering_vector(cos_theta, cfg)


def channel_vector(gbs: GbsSite, point: AirPoint, cfg: ArrayConfig, kappa: float) -> ChannelVector:
    """LoS channel from ``gbs`` to ``point`` with reference gain ``kappa`` (linear)."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    h = channel_xy(gbs.u, point.horizontal, point.altitude, cfg, kappa)
    return ChannelVector(entries=h, gbs_id=gbs.id, target=point)


def channel_outer(h) -> np.ndarray:
    """Rank-one Hermitian matrix ``h h^H``."""
    v = h.entries if isinstance(h, ChannelVector) else np.asarray(h)
    return np.outer(v, v.conj())
