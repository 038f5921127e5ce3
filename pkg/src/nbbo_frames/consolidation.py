"""Delivery of quotes to the SIP and best-bid/offer consolidation.

Each :class:`Convention` decides *when* a quote becomes current. Everything
else (per-side replacement, max bid / min ask, lowest-id tie-break) is shared.
"""

from __future__ import annotations

import csv
import itertools
import math
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .network import Network
from .quotes import QuoteUpdate, Side, lab_key
from .spacetime import (
    IntervalClass,
    LorentzBoost,
    SpacetimeEvent,
    boosted_time,
    classify,
    light_time,
)

Quote = tuple[int, str]  # (price ticks, exchange id)

SERIES_COLUMNS = ("t_us", "bid_ticks", "bid_venue", "ask_ticks", "ask_venue", "crossed")
MAX_FREE_EVENTS = 18


class CausalityViolation(ValueError):
    """A delivery would outrun light between emitter and SIP."""


@dataclass(frozen=True)
class ArrivalRecord:
    quote: QuoteUpdate
    arrival_time: float
    delay: float

    @property
    def exchange_id(self) -> str:
        return self.quote.exchange_id


# --- conventions -------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalOrder:
    """Current = received at the SIP by time t."""

    name = "arrival_order"

    def describe(self) -> str:
        return "order of arrival at the consolidation point"


@dataclass(frozen=True)
class LabFrameEmission:
    """Current = emitted by lab time t (omniscient lab-frame observer)."""

    name = "lab_frame"

    def describe(self) -> str:
        return "emission time in the Earth-fixed lab frame"


@dataclass(frozen=True)
class BoostedFrameEmission:
    """Current = emitted by time t' in the frame moving with ``boost``."""

    boost: LorentzBoost

    @property
    def name(self) -> str:
        return "boosted_" + "_".join(f"{b:+.6f}" for b in self.boost.beta)

    def describe(self) -> str:
        bx, by, bz = self.boost.beta
        return f"emission time in the frame moving at ({bx:.6g}, {by:.6g}, {bz:.6g})c"


@dataclass(frozen=True)
class UncertaintyInterval:
    """Timestamps known only to ±epsilon_clock; quotes become current after commit-wait."""

    epsilon_clock: float

    def __post_init__(self):
        if not self.epsilon_clock >= 0:
            raise ValueError("epsilon_clock must be non-negative")

    @property
    def name(self) -> str:
        return f"uncertainty_{self.epsilon_clock:g}us"

    def describe(self) -> str:
        return f"interval timestamps ±{self.epsilon_clock:g} µs with commit-wait"


Convention = Union[ArrivalOrder, LabFrameEmission, BoostedFrameEmission, UncertaintyInterval]


def convention_time(rec: ArrivalRecord, convention: Convention) -> float:
    """The instant ``rec``'s quote becomes current under ``convention``."""
    q = rec.quote
    if isinstance(convention, ArrivalOrder):
        return rec.arrival_time
    if isinstance(convention, LabFrameEmission):
        return q.t
    if isinstance(convention, BoostedFrameEmission):
        return boosted_time(convention.boost, q.event.x, q.t)
    if isinstance(convention, UncertaintyInterval):
        return q.t + convention.epsilon_clock
    raise TypeError(f"unknown convention {convention!r}")


# --- series types -------------------------------------------------------------

@dataclass(frozen=True)
class NbboSample:
    t: float
    best_bid: Optional[Quote]
    best_ask: Optional[Quote]

    @property
    def crossed(self) -> bool:
        return (
            self.best_bid is not None
            and self.best_ask is not None
            and self.best_bid[0] > self.best_ask[0]
        )

    @property
    def value(self) -> tuple[Optional[Quote], Optional[Quote]]:
        return (self.best_bid, self.best_ask)

    def record(self) -> tuple:
        bid, ask = self.best_bid or (None, None), self.best_ask or (None, None)
        return (self.t, bid[0], bid[1], ask[0], ask[1], self.crossed)


@dataclass(frozen=True)
class NbboSeries:
    """Step function: each sample holds from its time until the next sample."""

    samples: tuple[NbboSample, ...] = ()
    convention: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for prev, cur in zip(self.samples, self.samples[1:]):
            if not cur.t > prev.t:
                raise ValueError("sample times must be strictly increasing")
            if cur.value == prev.value:
                raise ValueError("consecutive samples must differ")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.samples]

    def at(self, t: float) -> Optional[NbboSample]:
        """Sample in force at ``t``; ``None`` before the first sample."""
        i = bisect_right(self.times, t) - 1
        return self.samples[i] if i >= 0 else None

    def records(self) -> list[tuple]:
        return [s.record() for s in self.samples]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_COLUMNS)
            for rec in self.records():
                t, bp, bv, ap, av, crossed = rec
                w.writerow((repr(t), _cell(bp), _cell(bv), _cell(ap), _cell(av), str(crossed).lower()))

    @classmethod
    def read_csv(cls, path: str | Path, convention: str = "") -> NbboSeries:
        samples = []
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                bid = None if row["bid_ticks"] == "" else (int(row["bid_ticks"]), row["bid_venue"])
                ask = None if row["ask_ticks"] == "" else (int(row["ask_ticks"]), row["ask_venue"])
                samples.append(NbboSample(float(row["t_us"]), bid, ask))
        return cls(tuple(samples), convention)


def _cell(v) -> str:
    return "" if v is None else str(v)


# --- delivery -----------------------------------------------------------------

def deliver(quotes: Iterable[QuoteUpdate], network: Network) -> list[ArrivalRecord]:
    """Propagate each quote to the SIP.

    Jitter draws are indexed by the quote's position in its exchange's
    emission sequence. Output is sorted by arrival time, then exchange id,
    then event id.
    """
    draw_index: dict[str, int] = defaultdict(int)
    sip = network.sip_position
    out = []
    for q in sorted(quotes, key=lab_key):
        link = network.sip_link(q.exchange_id)
        if link is None:
            delay = 0.0
        else:
            delay = network.propagation_delay(link, draw_index[q.exchange_id])
        draw_index[q.exchange_id] += 1
        floor = light_time(math.dist(q.event.x, sip))
        if delay < floor * (1 - 1e-12):
            raise CausalityViolation(
                f"{q.id}: delay {delay:.3f} µs below light time {floor:.3f} µs to the SIP"
            )
        out.append(ArrivalRecord(q, q.t + delay, delay))
    out.sort(key=arrival_key)
    return out


def arrival_key(rec: ArrivalRecord) -> tuple[float, str, str]:
    return (rec.arrival_time, rec.quote.exchange_id, rec.quote.id)


def arrival_event(rec: ArrivalRecord, network: Network) -> SpacetimeEvent:
    return SpacetimeEvent(f"{rec.quote.id}@SIP", network.sip_position, rec.arrival_time)


# --- consolidation ------------------------------------------------------------

def _best(book: dict[str, QuoteUpdate], side: Side) -> Optional[Quote]:
    best = None
    for ex in sorted(book):
        price = book[ex].price
        if best is None or (price > best[0] if side is Side.BID else price < best[0]):
            best = (price, ex)
    return best


def consolidate(
    arrivals: Sequence[ArrivalRecord],
    convention: Convention,
    *,
    axis: str = "time",
) -> NbboSeries:
    """Best bid/offer step function under ``convention``.

    A quote replaces the live quote of its (exchange, side) only if it was
    emitted later, so out-of-order arrivals never resurrect stale prices.
    With ``axis="rank"`` sample times are replaced by the rank of the
    triggering event in the convention's order, which makes series from
    different frames comparable.
    """
    if axis not in ("time", "rank"):
        raise ValueError("axis must be 'time' or 'rank'")
    keyed = sorted(
        ((convention_time(r, convention), r.quote.exchange_id, r.quote.id, r) for r in arrivals),
        key=lambda k: k[:3],
    )
    books: dict[Side, dict[str, QuoteUpdate]] = {Side.BID: {}, Side.ASK: {}}
    samples: list[NbboSample] = []
    last_value = None
    for group_end, (i, item) in _group_ends(keyed):
        q = item[3].quote
        live = books[q.side].get(q.exchange_id)
        if live is None or live.t < q.t:
            books[q.side][q.exchange_id] = q
        if not group_end:
            continue
        value = (_best(books[Side.BID], Side.BID), _best(books[Side.ASK], Side.ASK))
        if value != last_value:
            t = float(i) if axis == "rank" else item[0]
            samples.append(NbboSample(t, *value))
            last_value = value
    return NbboSeries(tuple(samples), _convention_name(convention))


def _group_ends(keyed):
    """Yield (is_last_of_equal_time_group, (index, item))."""
    n = len(keyed)
    for i, item in enumerate(keyed):
        yield (i == n - 1 or keyed[i + 1][0] != item[0]), (i, item)


def _convention_name(convention: Convention) -> str:
    return convention.name


# --- interval-of-uncertainty consolidation -------------------------------------

@dataclass(frozen=True)
class IntervalSample:
    t: float
    possible_best_bids: frozenset
    possible_best_asks: frozenset


@dataclass(frozen=True)
class IntervalNbbo:
    """Set-valued step function. ``None`` inside a set means "no quote on that side"."""

    samples: tuple[IntervalSample, ...] = ()

    def at(self, t: float) -> Optional[IntervalSample]:
        i = bisect_right([s.t for s in self.samples], t) - 1
        return self.samples[i] if i >= 0 else None


def consolidate_interval(arrivals: Sequence[ArrivalRecord], epsilon_clock: float) -> IntervalNbbo:
    """Every best bid/offer consistent with ±epsilon_clock timestamp uncertainty.

    Two quotes at different exchanges are ordered only when their intervals
    ``[t - ε, t + ε)`` are disjoint; quotes at one exchange are always in
    program order. At lab time t, with k quotes emitted so far, the possible
    states are all downward-closed sets of k quotes under that partial order.
    """
    if not epsilon_clock >= 0:
        raise ValueError("epsilon_clock must be non-negative")
    quotes = sorted((r.quote for r in arrivals), key=lab_key)
    n = len(quotes)
    if n == 0:
        return IntervalNbbo()
    times = [q.t for q in quotes]
    gap = 2.0 * epsilon_clock

    chains: dict[str, list[int]] = defaultdict(list)
    for i, q in enumerate(quotes):
        chains[q.exchange_id].append(i)
    chain_pos = {}
    for ex, idx in chains.items():
        for pos, i in enumerate(idx):
            chain_pos[i] = (ex, pos)
    chain_times = {ex: [times[i] for i in idx] for ex, idx in chains.items()}

    def below_count(i: int) -> int:
        # events strictly below i; the predicate is evaluated exactly as in
        # precedes() so that rounding in t - gap cannot misplace a cut
        ex, pos = chain_pos[i]
        if gap == 0.0:
            return i
        ti = times[i]
        cut = _partition_point(times, lambda t: ti - t >= gap)
        extra = pos - _partition_point(chain_times[ex], lambda t: ti - t >= gap)
        return cut + max(0, extra)

    def above_count(i: int) -> int:
        ex, pos = chain_pos[i]
        if gap == 0.0:
            return n - 1 - i
        ti = times[i]
        cut = n - _partition_point(times, lambda t: t - ti < gap)
        chain = chain_times[ex]
        later = len(chain) - _partition_point(chain, lambda t: t - ti < gap)
        extra = (len(chain) - 1 - pos) - later
        return cut + max(0, extra)

    down = [below_count(i) + 1 for i in range(n)]
    up = [above_count(i) + 1 for i in range(n)]

    def precedes(i: int, j: int) -> bool:
        if quotes[i].exchange_id == quotes[j].exchange_id:
            return i < j
        if gap == 0.0:
            return i < j
        return times[j] - times[i] >= gap

    # prefix tables: last bid/ask in the first m events of each chain
    last_side: dict[tuple[str, Side], list[Optional[QuoteUpdate]]] = {}
    for ex, idx in chains.items():
        for side in Side:
            acc: list[Optional[QuoteUpdate]] = [None]
            for i in idx:
                acc.append(quotes[i] if quotes[i].side is side else acc[-1])
            last_side[(ex, side)] = acc

    def best_of(counts: dict[str, int], side: Side) -> Optional[Quote]:
        book = {}
        for ex in chains:
            q = last_side[(ex, side)][counts.get(ex, 0)]
            if q is not None:
                book[ex] = q
        return _best(book, side)

    samples: list[IntervalSample] = []
    last = None
    for k in range(1, n + 1):
        if k < n and times[k] == times[k - 1]:
            continue
        mandatory = [i for i in range(n) if n - up[i] < k]
        free = [i for i in range(n) if n - up[i] >= k and down[i] <= k]
        need = k - len(mandatory)
        if len(free) > MAX_FREE_EVENTS:
            raise ValueError(
                f"{len(free)} mutually uncertain quotes near t={times[k - 1]}; "
                "epsilon_clock too large for exhaustive enumeration"
            )
        base = defaultdict(int)
        for i in mandatory:
            base[quotes[i].exchange_id] += 1
        bids, asks = set(), set()
        for chosen in itertools.combinations(free, need):
            chosen_set = set(chosen)
            if not all(
                p in chosen_set for c in chosen for p in free if p != c and precedes(p, c)
            ):
                continue
            counts = dict(base)
            for c in chosen:
                counts[quotes[c].exchange_id] = counts.get(quotes[c].exchange_id, 0) + 1
            bids.add(best_of(counts, Side.BID))
            asks.add(best_of(counts, Side.ASK))
        sample = IntervalSample(times[k - 1], frozenset(bids), frozenset(asks))
        if last is None or (sample.possible_best_bids, sample.possible_best_asks) != last:
            samples.append(sample)
            last = (sample.possible_best_bids, sample.possible_best_asks)
    return IntervalNbbo(tuple(samples))


def _partition_point(seq: Sequence[float], pred) -> int:
    """First index where ``pred`` turns false; ``pred`` must be monotone on ``seq``."""
    return bisect_left(seq, True, key=lambda v: not pred(v))


# --- engineered-simultaneity checks --------------------------------------------

@dataclass(frozen=True)
class EsReport:
    es1: bool
    witness: Optional[tuple[QuoteUpdate, QuoteUpdate]]
    es2: bool
    convention: str

    def as_dict(self) -> dict:
        return {
            "es1": self.es1,
            "witness": [q.id for q in self.witness] if self.witness else None,
            "es2": self.es2,
            "convention": self.convention,
        }


def es_conditions(
    quotes: Sequence[QuoteUpdate],
    network: Network | None = None,
    convention: Convention | None = None,
    epsilon: float = 1e-6,
) -> EsReport:
    """Check the two computable conditions of engineered simultaneity.

    es1: some cross-exchange quote pair is spacelike (first such pair in lab
    order is returned as witness). es2: the convention imposes a total order
    on such pairs, which every convention here does except the interval one.
    """
    convention = convention or ArrivalOrder()
    ordered = sorted(quotes, key=lab_key)
    witness = None
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.exchange_id != b.exchange_id and classify(a.event, b.event, epsilon) is IntervalClass.SPACELIKE:
                witness = (a, b)
                break
        if witness:
            break
    return EsReport(
        es1=witness is not None,
        witness=witness,
        es2=not isinstance(convention, UncertaintyInterval),
        convention=convention.describe(),
    )
