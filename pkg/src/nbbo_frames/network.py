"""Exchange network geometry: node positions, links, propagation delays."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .spacetime import R_EARTH_KM, gravitational_rate, light_time, medium_time

SIP_ID = "SIP"
MICROWAVE_INDEX = 1.0003


def node_position(latitude: float, longitude: float, altitude: float = 0.0) -> np.ndarray:
    """Earth-centred Cartesian position (km) on a spherical Earth.

    Axes: +x through (0°N, 0°E), +z through the north pole. ``altitude`` is in metres.
    """
    if not (abs(latitude) <= 90 and abs(longitude) <= 180):
        raise ValueError(f"coordinates out of range: lat={latitude}, lon={longitude}")
    r = R_EARTH_KM + altitude / 1000.0
    lat, lon = math.radians(latitude), math.radians(longitude)
    return np.array(
        [r * math.cos(lat) * math.cos(lon), r * math.cos(lat) * math.sin(lon), r * math.sin(lat)]
    )


def great_circle_km(p: Sequence[float], q: Sequence[float]) -> float:
    """Arc length between two positions projected onto the mean-radius sphere."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    cosang = float(p @ q / (np.linalg.norm(p) * np.linalg.norm(q)))
    return R_EARTH_KM * math.acos(max(-1.0, min(1.0, cosang)))


@dataclass(frozen=True)
class ExchangeNode:
    id: str
    name: str
    latitude: float
    longitude: float
    altitude: float = 0.0
    clock_rate: float = 1.0

    def __post_init__(self):
        # validates bounds
        node_position(self.latitude, self.longitude, self.altitude)
        if not self.clock_rate > 0:
            raise ValueError(f"node {self.id}: clock_rate must be positive")

    @property
    def position(self) -> tuple[float, float, float]:
        return tuple(node_position(self.latitude, self.longitude, self.altitude))

    def with_gravitational_clock(self) -> ExchangeNode:
        return ExchangeNode(
            self.id, self.name, self.latitude, self.longitude, self.altitude,
            gravitational_rate(self.altitude),
        )

    def local_time(self, t: float) -> float:
        """Reading of this node's clock at lab time ``t`` (synchronised at t = 0)."""
        return t * self.clock_rate


class MediumKind(enum.Enum):
    VACUUM = "vacuum"
    FIBER = "fiber"
    MICROWAVE = "microwave"


@dataclass(frozen=True)
class Medium:
    kind: MediumKind = MediumKind.FIBER
    n: float = 1.5

    def __post_init__(self):
        if self.kind is MediumKind.VACUUM and self.n != 1.0:
            raise ValueError("vacuum has refractive index 1")
        if self.n < 1.0:
            raise ValueError("refractive index must be >= 1")

    @classmethod
    def vacuum(cls) -> Medium:
        return cls(MediumKind.VACUUM, 1.0)

    @classmethod
    def fiber(cls, n: float = 1.5) -> Medium:
        return cls(MediumKind.FIBER, n)

    @classmethod
    def microwave(cls, n: float = MICROWAVE_INDEX) -> Medium:
        return cls(MediumKind.MICROWAVE, n)


JITTER_DISTRIBUTIONS = ("exponential", "uniform", "halfnormal")


@dataclass(frozen=True)
class Jitter:
    """Additive, non-negative, seeded delay noise.

    ``params``: ``scale_us`` (exponential), ``low_us``/``high_us`` (uniform),
    ``sigma_us`` (halfnormal).
    """

    dist: str
    params: Mapping[str, float]
    seed: int

    def __post_init__(self):
        if self.dist not in JITTER_DISTRIBUTIONS:
            raise ValueError(f"unknown jitter distribution {self.dist!r}")
        object.__setattr__(self, "params", dict(self.params))
        # fail early on bad params
        self.draw(0)

    def draw(self, index: int) -> float:
        rng = np.random.default_rng([self.seed, index])
        p = self.params
        if self.dist == "exponential":
            value = rng.exponential(p["scale_us"])
        elif self.dist == "uniform":
            value = rng.uniform(p.get("low_us", 0.0), p["high_us"])
        else:
            value = abs(rng.normal(0.0, p["sigma_us"]))
        return max(0.0, float(value))


@dataclass(frozen=True)
class Link:
    """Single fixed-delay channel between two nodes (undirected)."""

    source: str
    target: str
    medium: Medium = field(default_factory=Medium.fiber)
    distance_km: float | None = None
    jitter: Jitter | None = None
    label: str | None = None

    def __post_init__(self):
        if self.distance_km is not None and not self.distance_km > 0:
            raise ValueError(f"link {self.source}-{self.target}: distance override must be > 0")

    def connects(self, a: str, b: str) -> bool:
        return {self.source, self.target} == {a, b}

    @property
    def name(self) -> str:
        return self.label or f"{self.source}–{self.target}"


class Network:
    """Immutable exchange network with a designated SIP location.

    The SIP sits either on a node (``sip_node``) or at an explicit position;
    in the latter case links to it use the endpoint id ``"SIP"``.
    """

    def __init__(
        self,
        nodes: Iterable[ExchangeNode],
        links: Iterable[Link] = (),
        *,
        sip_node: str | None = None,
        sip_position: Sequence[float] | None = None,
        default_link: Medium | None = None,
        distance_mode: str = "chord",
    ):
        self._nodes = {}
        for node in nodes:
            if node.id in self._nodes or node.id == SIP_ID:
                raise ValueError(f"duplicate or reserved node id {node.id!r}")
            self._nodes[node.id] = node
        self._positions = {nid: np.array(n.position) for nid, n in self._nodes.items()}
        if (sip_node is None) == (sip_position is None):
            raise ValueError("give exactly one of sip_node or sip_position")
        if sip_node is not None and sip_node not in self._nodes:
            raise ValueError(f"SIP node {sip_node!r} is not in the network")
        if sip_position is not None:
            sip_position = np.asarray(sip_position, dtype=float)
            if sip_position.shape != (3,) or not np.all(np.isfinite(sip_position)):
                raise ValueError("sip_position must be a finite 3-vector")
        if distance_mode not in ("chord", "great_circle"):
            raise ValueError(f"unknown distance mode {distance_mode!r}")
        self.sip_node = sip_node
        self.default_link = default_link
        self.distance_mode = distance_mode
        self._sip_position = (
            self._positions[sip_node].copy() if sip_node is not None else sip_position
        )
        self._links = tuple(links)
        for link in self._links:
            for end in (link.source, link.target):
                if end not in self._nodes and not (end == SIP_ID and sip_node is None):
                    raise ValueError(f"link endpoint {end!r} does not resolve to a node")
            if link.source == link.target:
                raise ValueError(f"link {link.name} connects a node to itself")
            self.effective_distance(link)

    @property
    def nodes(self) -> dict[str, ExchangeNode]:
        return dict(self._nodes)

    @property
    def links(self) -> tuple[Link, ...]:
        return self._links

    @property
    def sip_id(self) -> str:
        return self.sip_node if self.sip_node is not None else SIP_ID

    @property
    def sip_position(self) -> tuple[float, float, float]:
        return tuple(float(c) for c in self._sip_position)

    def node(self, node_id: str) -> ExchangeNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise KeyError(f"unknown exchange id {node_id!r}") from None

    def position(self, node_id: str) -> tuple[float, float, float]:
        if node_id == SIP_ID and self.sip_node is None:
            return self.sip_position
        if node_id not in self._positions:
            raise KeyError(f"unknown exchange id {node_id!r}")
        return tuple(float(c) for c in self._positions[node_id])

    def geometric_distance(self, a: str, b: str) -> float:
        pa, pb = np.asarray(self.position(a)), np.asarray(self.position(b))
        if self.distance_mode == "great_circle":
            return great_circle_km(pa, pb)
        return float(np.linalg.norm(pa - pb))

    def effective_distance(self, link: Link) -> float:
        if link.distance_km is not None:
            return float(link.distance_km)
        d = self.geometric_distance(link.source, link.target)
        if d <= 0:
            raise ValueError(f"link {link.name} joins coincident nodes (distance 0)")
        return d

    def propagation_delay(self, link: Link, draw_index: int = 0) -> float:
        d = self.effective_distance(link)
        delay = medium_time(d, link.medium.n)
        if link.jitter is not None:
            delay += link.jitter.draw(draw_index)
        return delay

    def link_between(self, a: str, b: str) -> Link | None:
        for link in self._links:
            if link.connects(a, b):
                return link
        return None

    def sip_link(self, exchange_id: str) -> Link | None:
        """Link carrying ``exchange_id``'s quotes to the SIP.

        ``None`` when the exchange is co-located with the SIP. Falls back to
        an implicit link over the geometric distance when a default medium is set.
        """
        self.node(exchange_id)
        if exchange_id == self.sip_node:
            return None
        link = self.link_between(exchange_id, self.sip_id)
        if link is not None:
            return link
        if self.default_link is None:
            raise LookupError(
                f"no link from {exchange_id!r} to the SIP and no default link policy"
            )
        if self.geometric_distance(exchange_id, self.sip_id) == 0.0:
            return None
        return Link(exchange_id, self.sip_id, self.default_link)

    def local_time(self, node_id: str, t: float) -> float:
        return self.node(node_id).local_time(t)


def light_time_between(network: Network, a: str, b: str) -> float:
    """Vacuum light time over the straight-line separation of two nodes."""
    pa, pb = np.asarray(network.position(a)), np.asarray(network.position(b))
    return light_time(float(np.linalg.norm(pa - pb)))


def effective_distance(link: Link, network: Network) -> float:
    return network.effective_distance(link)


def propagation_delay(link: Link, network: Network, draw_index: int = 0) -> float:
    return network.propagation_delay(link, draw_index)


# Data-centre clusters and the published pairwise distances between them.
PAPER_NODES = (
    ExchangeNode("MAHWAH", "Mahwah, NJ", 41.08, -74.16),
    ExchangeNode("CARTERET", "Carteret, NJ", 40.58, -74.23),
    ExchangeNode("SECAUCUS", "Secaucus, NJ", 40.79, -74.06),
    ExchangeNode("WEEHAWKEN", "Weehawken, NJ", 40.77, -74.02),
    ExchangeNode("AURORA", "Aurora, IL", 41.76, -88.29),
)

PAPER_LINKS = (
    Link("MAHWAH", "CARTERET", Medium.fiber(1.5), 43.0, label="Mahwah–Carteret"),
    Link("MAHWAH", "SECAUCUS", Medium.fiber(1.5), 34.0, label="Mahwah–Secaucus"),
    Link("CARTERET", "SECAUCUS", Medium.fiber(1.5), 27.0, label="Carteret–Secaucus"),
    Link("MAHWAH", "AURORA", Medium.fiber(1.5), 1180.0, label="NJ cluster–Aurora"),
)


def paper_network(sip_node: str = "MAHWAH") -> Network:
    """Five-cluster U.S. network with the published distances pinned as overrides."""
    return Network(PAPER_NODES, PAPER_LINKS, sip_node=sip_node, default_link=Medium.fiber(1.5))
