"""Minkowski geometry in exchange-network units (km, microseconds).

Events carry a 3-vector position in km and a coordinate time in µs, so the
speed of light is ``C = 0.299792458`` km/µs and intervals come out in km².
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Speed of light in km/µs.
C = 0.299792458
#: Speed of light in m/s, for the gravitational rate factor.
C_SI = 299_792_458.0
#: Standard surface gravity, m/s².
G_SURFACE = 9.80665
#: Mean Earth radius, km.
R_EARTH_KM = 6371.0

#: Largest speed flip_boost will normally hand out.
MAX_FLIP_SPEED = C * (1.0 - 1e-6)

DEFAULT_EPSILON_KM2 = 1e-6
DEFAULT_ORDER_TOLERANCE_US = 1e-6
MAX_ALTITUDE_M = 10_000.0


class NotSpacelike(ValueError):
    """Raised when an operation needs a spacelike pair and gets one with absolute order."""


def _vec3(x: Sequence[float]) -> tuple[float, float, float]:
    if len(x) != 3:
        raise ValueError(f"position must have 3 components, got {len(x)}")
    v = (float(x[0]), float(x[1]), float(x[2]))
    if not all(math.isfinite(c) for c in v):
        raise ValueError(f"position must be finite, got {v}")
    return v


@dataclass(frozen=True)
class SpacetimeEvent:
    """A point in the lab frame: ``x`` in km, ``t`` in µs."""

    id: str
    x: tuple[float, float, float]
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", _vec3(self.x))
        t = float(self.t)
        if not math.isfinite(t):
            raise ValueError(f"event {self.id!r}: time must be finite")
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class LorentzBoost:
    """Inertial frame moving with velocity ``v`` (km/µs) relative to the lab."""

    v: tuple[float, float, float] = (0.0, 0.0, 0.0)
    speed: float = field(init=False, repr=False)
    gamma: float = field(init=False, repr=False)

    def __post_init__(self):
        v = _vec3(self.v)
        speed = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
        if speed >= C:
            raise ValueError(f"boost speed {speed / C:.9f}c is not below c")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "speed", speed)
        object.__setattr__(self, "gamma", 1.0 / math.sqrt(1.0 - (speed / C) ** 2))

    @classmethod
    def from_beta(cls, beta: Sequence[float]) -> LorentzBoost:
        """Build from a velocity given as a fraction of c."""
        return cls(tuple(C * float(b) for b in beta))

    @property
    def beta(self) -> tuple[float, float, float]:
        return tuple(c / C for c in self.v)

    def inverse(self) -> LorentzBoost:
        return LorentzBoost(tuple(-c for c in self.v))


class IntervalClass(enum.Enum):
    TIMELIKE = "timelike"
    SPACELIKE = "spacelike"
    LIGHTLIKE = "lightlike"


class Ordering(enum.Enum):
    A_BEFORE_B = "a_before_b"
    B_BEFORE_A = "b_before_a"
    INDISTINGUISHABLE = "indistinguishable"


def separation(a: SpacetimeEvent, b: SpacetimeEvent) -> float:
    """Euclidean distance between the two event positions, km."""
    return math.dist(a.x, b.x)


def interval_squared(a: SpacetimeEvent, b: SpacetimeEvent) -> float:
    """Invariant interval ``c²Δt² − |Δx|²`` in km² (positive is timelike)."""
    dt = a.t - b.t
    dx = separation(a, b)
    return (C * dt) ** 2 - dx**2


def classify(
    a: SpacetimeEvent, b: SpacetimeEvent, epsilon: float = DEFAULT_EPSILON_KM2
) -> IntervalClass:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    s2 = interval_squared(a, b)
    if s2 < -epsilon:
        return IntervalClass.SPACELIKE
    if s2 > epsilon:
        return IntervalClass.TIMELIKE
    return IntervalClass.LIGHTLIKE


def boost_coordinates(
    boost: LorentzBoost, x: Sequence[float], t: float
) -> tuple[tuple[float, float, float], float]:
    """Transform raw lab coordinates into the boosted frame."""
    if boost.speed == 0.0:
        return (float(x[0]), float(x[1]), float(x[2])), float(t)
    v = np.asarray(boost.v)
    xv = np.asarray(x, dtype=float)
    g = boost.gamma
    n = v / boost.speed
    x_par = float(xv @ n)
    t_new = g * (t - float(xv @ v) / C**2)
    # parallel component boosted, perpendicular left alone
    x_new = xv + ((g - 1.0) * x_par - g * boost.speed * t) * n
    return (float(x_new[0]), float(x_new[1]), float(x_new[2])), t_new


def boost_event(boost: LorentzBoost, e: SpacetimeEvent) -> SpacetimeEvent:
    x, t = boost_coordinates(boost, e.x, e.t)
    return SpacetimeEvent(e.id, x, t)


def boosted_time(boost: LorentzBoost, x: Sequence[float], t: float) -> float:
    """Time coordinate only; cheaper than a full ``boost_event``."""
    if boost.speed == 0.0:
        return float(t)
    vx = boost.v[0] * x[0] + boost.v[1] * x[1] + boost.v[2] * x[2]
    return boost.gamma * (t - vx / C**2)


def ordering_in_frame(
    a: SpacetimeEvent,
    b: SpacetimeEvent,
    boost: LorentzBoost | None = None,
    tolerance: float = DEFAULT_ORDER_TOLERANCE_US,
) -> Ordering:
    """Which of ``a`` and ``b`` comes first in the frame given by ``boost``."""
    boost = boost or LorentzBoost()
    dt = boosted_time(boost, a.x, a.t) - boosted_time(boost, b.x, b.t)
    if abs(dt) <= tolerance:
        return Ordering.INDISTINGUISHABLE
    return Ordering.A_BEFORE_B if dt < 0 else Ordering.B_BEFORE_A


def flip_boost(
    a: SpacetimeEvent,
    b: SpacetimeEvent,
    margin: float = 0.01,
    epsilon: float = DEFAULT_EPSILON_KM2,
    tolerance: float = DEFAULT_ORDER_TOLERANCE_US,
) -> LorentzBoost:
    """Smallest-axis boost that reverses the coordinate order of a spacelike pair.

    The boost points along ``x_a - x_b`` (signed by ``t_a - t_b``) with speed
    ``c²|Δt|/|Δx|`` scaled by ``1 + margin``. Simultaneous pairs get
    ``margin * c``. Raises :class:`NotSpacelike` for timelike or lightlike pairs.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    cls = classify(a, b, epsilon)
    if cls is not IntervalClass.SPACELIKE:
        raise NotSpacelike(
            f"{a.id!r} and {b.id!r} are {cls.value}: |Δt| >= |Δx|/c, so every "
            "inertial frame agrees on their order and no flip exists"
        )
    dt = a.t - b.t
    dx = np.subtract(a.x, b.x)
    dist = float(np.linalg.norm(dx))
    axis = dx / dist
    if dt < 0:
        axis = -axis

    threshold = C**2 * abs(dt) / dist
    if dt == 0.0:
        speed = margin * C
    else:
        speed = min(MAX_FLIP_SPEED, threshold * (1.0 + margin))
        if speed <= threshold:
            # pair hugs the light cone; the cap sits below the threshold
            speed = threshold + 0.5 * (C - threshold)

    before = ordering_in_frame(a, b, None, tolerance)
    for _ in range(64):
        boost = LorentzBoost(tuple(speed * axis))
        after = ordering_in_frame(a, b, boost, tolerance)
        if after is not before and after is not Ordering.INDISTINGUISHABLE:
            return boost
        # coordinate gap still inside the tolerance band: push toward c
        speed = speed + 0.5 * (C - speed)
    raise NotSpacelike(f"could not resolve an order flip for {a.id!r}, {b.id!r}")


def light_time(d: float) -> float:
    """Vacuum light travel time over ``d`` km, in µs."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return d / C


def medium_time(d: float, refractive_index: float) -> float:
    """Propagation time over ``d`` km in a medium of index ``n``, in µs."""
    if refractive_index < 1.0:
        raise ValueError("refractive index must be >= 1")
    return light_time(d) * refractive_index


def gravitational_rate(altitude_m: float) -> float:
    """First-order clock rate factor ``1 + g h / c²`` relative to sea level."""
    if not -MAX_ALTITUDE_M <= altitude_m <= MAX_ALTITUDE_M:
        raise ValueError(
            f"altitude {altitude_m} m outside the ±{MAX_ALTITUDE_M:.0f} m weak-field range"
        )
    return 1.0 + G_SURFACE * altitude_m / C_SI**2
