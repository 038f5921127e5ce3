"""Convention divergence, frame-flip witnesses and latency-arbitrage races."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .consolidation import (
    ArrivalRecord,
    BoostedFrameEmission,
    LabFrameEmission,
    NbboSeries,
    consolidate,
    deliver,
)
from .network import Jitter, Network
from .quotes import QuoteUpdate, Side, lab_key
from .spacetime import LorentzBoost, flip_boost, light_time, medium_time

#: Consolidated-feed latency after emission, µs.
SIP_LATENCY_US = 1128.0
#: Representative direct-feed latency, µs.
DIRECT_FEED_US = 20.0
#: HFT execution bound, µs.
HFT_EXECUTION_US = 10.0


# --- divergence -----------------------------------------------------------------

@dataclass(frozen=True)
class DisagreementWindow:
    start: float
    end: float
    first: tuple
    second: tuple

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class DivergenceReport:
    total_time: float
    windows: tuple[DisagreementWindow, ...]

    @property
    def disagreement_fraction(self) -> float:
        if self.total_time <= 0:
            return 0.0
        return sum(w.length for w in self.windows) / self.total_time

    @property
    def spans(self) -> list[tuple[float, float]]:
        return [(w.start, w.end) for w in self.windows]

    def as_dict(self) -> dict:
        return {
            "total_time_us": self.total_time,
            "disagreement_fraction": self.disagreement_fraction,
            "windows": [
                {"start_us": w.start, "end_us": w.end, "first": _jsonable(w.first), "second": _jsonable(w.second)}
                for w in self.windows
            ],
        }


def _jsonable(value):
    bid, ask = value
    return {"bid": list(bid) if bid else None, "ask": list(ask) if ask else None}


def nbbo_divergence(
    s1: NbboSeries, s2: NbboSeries, horizon: float, start: float = 0.0
) -> DivergenceReport:
    """Intervals of ``[start, horizon)`` where the two step functions disagree.

    A series says nothing before its first sample, so comparison begins once
    both have started. Prices and venues are compared exactly.
    """
    if horizon < start:
        raise ValueError("horizon precedes start")
    if not s1.samples or not s2.samples:
        return DivergenceReport(horizon - start, ())
    lo = max(start, s1.samples[0].t, s2.samples[0].t)
    cuts = sorted({t for t in s1.times + s2.times if lo < t < horizon} | {lo})
    windows: list[DisagreementWindow] = []
    for a, b in zip(cuts, cuts[1:] + [horizon]):
        if a >= b:
            continue
        v1, v2 = s1.at(a).value, s2.at(a).value
        if v1 == v2:
            continue
        if windows and windows[-1].end == a and (windows[-1].first, windows[-1].second) == (v1, v2):
            windows[-1] = DisagreementWindow(windows[-1].start, b, v1, v2)
        else:
            windows.append(DisagreementWindow(a, b, v1, v2))
    return DivergenceReport(horizon - start, tuple(windows))


# --- frame-flip witness -------------------------------------------------------------

@dataclass(frozen=True)
class WitnessReport:
    boost: LorentzBoost
    frame_S: NbboSeries
    frame_Sprime: NbboSeries
    divergence: DivergenceReport

    @property
    def update_orders_differ(self) -> bool:
        return [s.value for s in self.frame_S] != [s.value for s in self.frame_Sprime]


def theorem1_witness(
    quotes: Sequence[QuoteUpdate], network: Network, margin: float = 0.01
) -> WitnessReport:
    """Two inertial frames whose consolidated best prices differ for this pair.

    Raises ``NotSpacelike`` when the pair's order is absolute. Divergence is
    measured on the event-rank axis, since the two frames do not share a
    time coordinate.
    """
    alpha, beta = quotes
    boost = flip_boost(alpha.event, beta.event, margin)
    arrivals = deliver([alpha, beta], network)
    s = consolidate(arrivals, LabFrameEmission())
    sp = consolidate(arrivals, BoostedFrameEmission(boost))
    rank_s = consolidate(arrivals, LabFrameEmission(), axis="rank")
    rank_sp = consolidate(arrivals, BoostedFrameEmission(boost), axis="rank")
    return WitnessReport(boost, s, sp, nbbo_divergence(rank_s, rank_sp, horizon=2.0))


# --- races --------------------------------------------------------------------------

class Winner(enum.Enum):
    FAST = "fast"
    SLOW = "slow"


@dataclass(frozen=True)
class FeedModel:
    """Direct-feed vs consolidated-feed latencies plus the fast trader's reaction time.

    ``reaction_jitter`` adds seeded per-race noise to the reaction time; the
    nominal window is unaffected but the realised winner can flip.
    """

    delta_direct: float = DIRECT_FEED_US
    delta_sip: float = SIP_LATENCY_US
    reaction: float = 0.0
    reaction_jitter: Optional[Jitter] = None

    def __post_init__(self):
        if min(self.delta_direct, self.delta_sip, self.reaction) < 0:
            raise ValueError("feed latencies must be non-negative")
        if not self.delta_direct < self.delta_sip:
            raise ValueError("direct feed must be faster than the SIP feed for races to exist")

    @property
    def window(self) -> float:
        return self.delta_sip - self.delta_direct - self.reaction

    @property
    def feed_ratio(self) -> float:
        return float("inf") if self.delta_direct == 0 else self.delta_sip / self.delta_direct


@dataclass(frozen=True)
class RaceEvent:
    trigger: QuoteUpdate
    stale_quote: QuoteUpdate
    window: float
    winner: Winner
    improvement: int
    profit: int

    def record(self) -> tuple:
        return (
            self.trigger.id, self.trigger.exchange_id, self.stale_quote.id,
            self.stale_quote.exchange_id, repr(self.trigger.t), repr(self.window),
            self.winner.value, self.improvement, self.profit,
        )


RACE_COLUMNS = (
    "trigger_id", "trigger_venue", "stale_id", "stale_venue", "t_us",
    "window_us", "winner", "improvement_ticks", "profit",
)


def crossing_improvement(trigger: QuoteUpdate, resting: QuoteUpdate) -> int:
    """Ticks by which ``trigger`` prices through ``resting`` (0 if it does not)."""
    if trigger.side is resting.side:
        return 0
    if trigger.side is Side.BID:
        return max(0, trigger.price - resting.price)
    return max(0, resting.price - trigger.price)


def detect_races(arrivals: Sequence[ArrivalRecord], feeds: FeedModel) -> list[RaceEvent]:
    """Stale-quote races implied by the arrival log.

    Quotes are replayed in emission order (time, venue, id). A new quote
    triggers a race against every still-unraced live quote at another venue
    that it prices through; each stale quote is raced at most once. Nothing
    is recorded when the nominal window is not positive.
    """
    if feeds.window <= 0:
        return []
    quotes = sorted((r.quote for r in arrivals), key=lab_key)
    live: dict[tuple[str, Side], QuoteUpdate] = {}
    raced: set[str] = set()
    races: list[RaceEvent] = []
    for q in quotes:
        for (ex, side), resting in sorted(live.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
            if ex == q.exchange_id or resting.id in raced:
                continue
            imp = crossing_improvement(q, resting)
            if imp > 0:
                raced.add(resting.id)
                races.append(_race(q, resting, imp, feeds, len(races)))
        live[(q.exchange_id, q.side)] = q
    return races


def _race(trigger, resting, improvement, feeds: FeedModel, index: int) -> RaceEvent:
    realised = feeds.window
    if feeds.reaction_jitter is not None:
        realised -= feeds.reaction_jitter.draw(index)
    winner = Winner.FAST if realised > 0 else Winner.SLOW
    profit = improvement * min(trigger.size, resting.size) if winner is Winner.FAST else 0
    return RaceEvent(trigger, resting, feeds.window, winner, improvement, profit)


@dataclass(frozen=True)
class RaceSummary:
    n_races: int
    races_per_minute_per_security: float
    fast_win_fraction: float
    total_profit: int

    def as_dict(self) -> dict:
        return {
            "n_races": self.n_races,
            "races_per_minute_per_security": self.races_per_minute_per_security,
            "fast_win_fraction": self.fast_win_fraction,
            "total_profit": self.total_profit,
        }


def race_summary(races: Sequence[RaceEvent], duration: float, n_securities: int = 1) -> RaceSummary:
    if not duration > 0 or n_securities <= 0:
        raise ValueError("duration and n_securities must be positive")
    if not races:
        return RaceSummary(0, 0.0, 0.0, 0)
    minutes = duration / 60e6
    fast = sum(r.winner is Winner.FAST for r in races)
    return RaceSummary(
        len(races),
        len(races) / minutes / n_securities,
        fast / len(races),
        sum(r.profit for r in races),
    )


# --- timescales --------------------------------------------------------------------

TIMESCALE_COLUMNS = ("distance_km", "light_us", "fiber_us", "sip_us", "direct_us", "hft_us")


def timescale_rows(
    distances: Iterable[float],
    feeds: FeedModel | None = None,
    fiber_index: float = 1.5,
) -> list[tuple[float, float, float, float, float, float]]:
    """Distance against light time, fiber time and the flat feed latencies."""
    feeds = feeds or FeedModel()
    return [
        (d, light_time(d), medium_time(d, fiber_index), feeds.delta_sip, feeds.delta_direct, HFT_EXECUTION_US)
        for d in distances
    ]
