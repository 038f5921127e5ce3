"""Quote-update streams: seeded synthetic generators and scripted fixtures."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .network import ExchangeNode, Link, Medium, Network
from .spacetime import R_EARTH_KM, SpacetimeEvent

MAX_PRICE_TICKS = 2**31 - 1
EVENT_FILE_COLUMNS = ("exchange_id", "t_emit_us", "side", "price_ticks", "size")


class Side(enum.Enum):
    BID = "bid"
    ASK = "ask"

    @property
    def opposite(self) -> Side:
        return Side.ASK if self is Side.BID else Side.BID


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass(frozen=True)
class QuoteUpdate:
    event: SpacetimeEvent
    exchange_id: str
    side: Side
    price: int
    size: int

    def __post_init__(self):
        if not isinstance(self.side, Side):
            object.__setattr__(self, "side", Side(self.side))
        if int(self.price) != self.price or int(self.size) != self.size:
            raise ScenarioError(f"{self.id}: price and size must be integers")
        if not 0 < self.price <= MAX_PRICE_TICKS:
            raise ScenarioError(f"{self.id}: price {self.price} ticks out of range")
        if self.size <= 0:
            raise ScenarioError(f"{self.id}: size must be positive")

    @property
    def id(self) -> str:
        return self.event.id

    @property
    def t(self) -> float:
        return self.event.t


def lab_key(q: QuoteUpdate) -> tuple[float, str, str]:
    """Total order on emissions: time, then exchange id, then event id."""
    return (q.t, q.exchange_id, q.id)


def check_quotes(quotes: Iterable[QuoteUpdate], network: Network | None = None) -> None:
    """Validate per-exchange monotone times and, given a network, positions."""
    last: dict[str, QuoteUpdate] = {}
    seen: set[str] = set()
    for q in sorted(quotes, key=lab_key):
        if q.id in seen:
            raise ScenarioError(f"duplicate event id {q.id!r}")
        seen.add(q.id)
        prev = last.get(q.exchange_id)
        if prev is not None and not prev.t < q.t:
            raise ScenarioError(
                f"{prev.id!r} and {q.id!r} share emission time {q.t} at {q.exchange_id}"
            )
        last[q.exchange_id] = q
        if network is not None:
            try:
                pos = network.position(q.exchange_id)
            except KeyError as exc:
                raise ScenarioError(str(exc)) from None
            if math.dist(pos, q.event.x) > 1e-6:
                raise ScenarioError(f"{q.id!r} is not positioned at exchange {q.exchange_id}")


@dataclass(frozen=True)
class MidWalk:
    start_ticks: int = 10_000
    max_step_ticks: int = 1


@dataclass(frozen=True)
class StreamSpec:
    exchange_id: str
    seed: int
    rate_per_s: float
    duration_us: float
    mid_walk: MidWalk = field(default_factory=MidWalk)
    spread_ticks: int = 2
    lot_shares: int = 100
    start_us: float = 0.0

    def __post_init__(self):
        if not self.rate_per_s > 0:
            raise ScenarioError("stream rate must be positive")
        if self.duration_us < 0:
            raise ScenarioError("stream duration must be non-negative")
        if self.spread_ticks < 0 or self.lot_shares <= 0:
            raise ScenarioError("spread must be >= 0 and lot size > 0")


def _reflect(mid: int) -> int:
    if mid < 1:
        return 2 - mid
    if mid > MAX_PRICE_TICKS:
        return 2 * MAX_PRICE_TICKS - mid
    return mid


def generate_stream(spec: StreamSpec, node: ExchangeNode) -> list[QuoteUpdate]:
    """Poisson-timed quotes with a reflecting tick random walk for the mid."""
    if spec.exchange_id != node.id:
        raise ScenarioError(f"stream for {spec.exchange_id!r} given node {node.id!r}")
    rng = np.random.default_rng(spec.seed)
    pos = node.position
    mean_gap = 1e6 / spec.rate_per_s
    end = spec.start_us + spec.duration_us
    half = spec.spread_ticks // 2
    mid = spec.mid_walk.start_ticks
    step = spec.mid_walk.max_step_ticks

    out = []
    t = spec.start_us
    while True:
        nxt = t + rng.exponential(mean_gap)
        # strictly increasing even if the draw underflows against t
        t = nxt if nxt > t else math.nextafter(t, math.inf)
        if t >= end:
            break
        mid = _reflect(mid + int(rng.integers(-step, step + 1)))
        side = Side.BID if rng.random() < 0.5 else Side.ASK
        bid = max(1, mid - half)
        price = bid if side is Side.BID else min(MAX_PRICE_TICKS, bid + spec.spread_ticks)
        size = int(rng.integers(1, 6)) * spec.lot_shares
        ev = SpacetimeEvent(f"{node.id}:{len(out)}", pos, t)
        out.append(QuoteUpdate(ev, node.id, side, price, size))
    return out


def generate_streams(specs: Sequence[StreamSpec], network: Network) -> list[QuoteUpdate]:
    quotes = []
    for spec in specs:
        quotes.extend(generate_stream(spec, network.node(spec.exchange_id)))
    quotes.sort(key=lab_key)
    check_quotes(quotes)
    return quotes


# --- scripted fixtures -------------------------------------------------------

THEOREM1_SEPARATION_KM = 43.0


def theorem1_network() -> Network:
    """Two exchanges 43 km apart on the equator; the SIP sits on exchange A.

    B's quotes reach the SIP over plain fiber (n = 1.5) along the chord.
    """
    dlon = math.degrees(2.0 * math.asin(THEOREM1_SEPARATION_KM / (2.0 * R_EARTH_KM)))
    nodes = [ExchangeNode("A", "Exchange A", 0.0, 0.0), ExchangeNode("B", "Exchange B", 0.0, dlon)]
    return Network(nodes, [Link("B", "A", Medium.fiber(1.5))], sip_node="A")


def theorem1_fixture(network: Network | None = None) -> list[QuoteUpdate]:
    """α: bid 100 at A, t = 50 µs. β: bid 101 at B, t = 0 µs."""
    network = network or theorem1_network()
    alpha = QuoteUpdate(SpacetimeEvent("alpha", network.position("A"), 50.0), "A", Side.BID, 100, 100)
    beta = QuoteUpdate(SpacetimeEvent("beta", network.position("B"), 0.0), "B", Side.BID, 101, 100)
    return [alpha, beta]


def race_calibration_quotes(
    network: Network,
    informed: str,
    resting: str,
    races_per_minute: float,
    duration_us: float,
    seed: int,
    *,
    mid_ticks: int = 10_000,
    jump_ticks: int = 3,
    catchup_us: float = 5_000.0,
    lot_shares: int = 100,
) -> list[QuoteUpdate]:
    """Two-venue stream producing exactly one crossable stale quote per information event.

    Information events are stratified: one per ``60e6 / races_per_minute`` µs
    slot at a seeded offset. At each, ``informed`` jumps its quotes by
    ``jump_ticks`` (crossing ``resting``'s opposite side); ``resting`` realigns
    ``catchup_us`` later.
    """
    if jump_ticks < 3:
        raise ScenarioError("jump_ticks must be >= 3 to cross a 2-tick spread")
    rng = np.random.default_rng(seed)
    slot = 60e6 / races_per_minute
    n_events = int(duration_us // slot)
    if catchup_us + 2.0 >= 0.8 * slot:
        raise ScenarioError("catch-up delay must fit inside an information slot")
    pos = {ex: network.position(ex) for ex in (informed, resting)}
    seq = {informed: 0, resting: 0}
    out: list[QuoteUpdate] = []

    def emit(ex: str, t: float, side: Side, price: int) -> None:
        ev = SpacetimeEvent(f"{ex}:{seq[ex]}", pos[ex], t)
        seq[ex] += 1
        out.append(QuoteUpdate(ev, ex, side, price, lot_shares))

    mid = mid_ticks
    emit(informed, 0.0, Side.BID, mid - 1)
    emit(informed, 1.0, Side.ASK, mid + 1)
    emit(resting, 0.0, Side.BID, mid - 1)
    emit(resting, 1.0, Side.ASK, mid + 1)
    for i in range(n_events):
        t = (i + 0.1 + 0.7 * rng.random()) * slot
        up = rng.random() < 0.5
        mid = _reflect(mid + (jump_ticks if up else -jump_ticks))
        first, second = (Side.BID, Side.ASK) if up else (Side.ASK, Side.BID)
        for ex, t0 in ((informed, t), (resting, t + catchup_us)):
            px = {Side.BID: mid - 1, Side.ASK: mid + 1}
            emit(ex, t0, first, px[first])
            emit(ex, t0 + 1.0, second, px[second])
    out.sort(key=lab_key)
    return out


# --- scenario event files ----------------------------------------------------

def load_scenario(path: str | Path, network: Network) -> list[QuoteUpdate]:
    """Read a CSV event file and validate it against ``network``.

    Required columns: exchange_id, t_emit_us, side, price_ticks, size.
    Optional: event_id (defaults to ``<exchange_id>:<row>``) and
    x_km/y_km/z_km, which must match the exchange position.
    """
    path = Path(path)
    quotes = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in EVENT_FILE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ScenarioError(f"{path}: missing columns {missing}")
        for row_no, row in enumerate(reader, start=2):
            where = f"{path}:{row_no}"
            ex = row["exchange_id"].strip()
            try:
                pos = network.position(ex)
            except KeyError:
                raise ScenarioError(f"{where}: unknown exchange id {ex!r}") from None
            if row.get("x_km"):
                given = tuple(float(row[k]) for k in ("x_km", "y_km", "z_km"))
                if math.dist(given, pos) > 1e-6:
                    raise ScenarioError(f"{where}: position does not match exchange {ex}")
            try:
                eid = (row.get("event_id") or "").strip() or f"{ex}:{row_no - 2}"
                ev = SpacetimeEvent(eid, pos, float(row["t_emit_us"]))
                quotes.append(
                    QuoteUpdate(
                        ev, ex, Side(row["side"].strip().lower()),
                        int(row["price_ticks"]), int(row["size"]),
                    )
                )
            except (ValueError, ScenarioError) as exc:
                raise ScenarioError(f"{where}: {exc}") from None
    quotes.sort(key=lab_key)
    check_quotes(quotes, network)
    return quotes


def write_event_file(quotes: Iterable[QuoteUpdate], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id",) + EVENT_FILE_COLUMNS)
        for q in sorted(quotes, key=lab_key):
            w.writerow((q.id, q.exchange_id, repr(q.t), q.side.value, q.price, q.size))
