"""Happened-before graphs over emissions and SIP arrivals, plus Lamport clocks."""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .consolidation import ArrivalRecord, arrival_event
from .network import Network
from .quotes import QuoteUpdate, lab_key
from .spacetime import LorentzBoost, SpacetimeEvent, boosted_time, light_time, separation

PROGRAM = "program"
MESSAGE = "message"


class SuperluminalEdge(ValueError):
    pass


class CycleError(ValueError):
    pass


class CausalGraph:
    """Events with node attribution, program-order edges and message edges.

    Immutable after construction. Message edges must respect light travel
    time in the lab frame; cycles are rejected.
    """

    def __init__(
        self,
        events: Iterable[tuple[SpacetimeEvent, str]] = (),
        program_edges: Iterable[tuple[str, str]] = (),
        message_edges: Iterable[tuple[str, str]] = (),
    ):
        self._events: dict[str, SpacetimeEvent] = {}
        self._node: dict[str, str] = {}
        for ev, node in events:
            if ev.id in self._events:
                raise ValueError(f"duplicate event id {ev.id!r}")
            self._events[ev.id] = ev
            self._node[ev.id] = node
        self._edges: list[tuple[str, str, str]] = []
        self._succ: dict[str, list[str]] = defaultdict(list)
        self._pred: dict[str, list[str]] = defaultdict(list)
        for a, b in program_edges:
            self._add(a, b, PROGRAM)
        for a, b in message_edges:
            send, recv = self.event(a), self.event(b)
            need = light_time(separation(send, recv))
            if recv.t - send.t < need - 1e-9 * max(1.0, abs(recv.t)):
                raise SuperluminalEdge(
                    f"message {a} -> {b} takes {recv.t - send.t:.6g} µs, light needs {need:.6g} µs"
                )
            self._add(a, b, MESSAGE)
        self._order = self._topological_order()
        self._reach: dict[str, frozenset[str]] = {}

    def _add(self, a: str, b: str, kind: str) -> None:
        self.event(a), self.event(b)
        if a == b:
            raise CycleError(f"self-loop on {a!r}")
        self._edges.append((a, b, kind))
        self._succ[a].append(b)
        self._pred[b].append(a)

    def _topological_order(self) -> list[str]:
        indeg = {e: len(self._pred[e]) for e in self._events}
        heap = [e for e, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            e = heapq.heappop(heap)
            order.append(e)
            for s in self._succ[e]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(heap, s)
        if len(order) != len(self._events):
            raise CycleError("happened-before graph contains a cycle")
        return order

    # queries

    def __len__(self) -> int:
        return len(self._events)

    def __contains__(self, event_id: str) -> bool:
        return event_id in self._events

    @property
    def events(self) -> dict[str, SpacetimeEvent]:
        return dict(self._events)

    @property
    def edges(self) -> list[tuple[str, str, str]]:
        return list(self._edges)

    @property
    def program_edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, k in self._edges if k == PROGRAM]

    @property
    def message_edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, k in self._edges if k == MESSAGE]

    @property
    def topological_order(self) -> list[str]:
        return list(self._order)

    def event(self, event_id: str) -> SpacetimeEvent:
        try:
            return self._events[event_id]
        except KeyError:
            raise KeyError(f"unknown event id {event_id!r}") from None

    def node_of(self, event_id: str) -> str:
        self.event(event_id)
        return self._node[event_id]

    def successors(self, event_id: str) -> list[str]:
        return list(self._succ[event_id])

    def descendants(self, event_id: str) -> frozenset[str]:
        """Every event reachable from ``event_id`` (memoised)."""
        self.event(event_id)
        if event_id not in self._reach:
            # fill in reverse topological order so successors are ready
            for e in reversed(self._order):
                if e in self._reach:
                    continue
                acc = set()
                for s in self._succ[e]:
                    acc.add(s)
                    acc |= self._reach[s]
                self._reach[e] = frozenset(acc)
        return self._reach[event_id]

    def write_edge_list(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            for a, b, kind in self._edges:
                fh.write(f"{a},{b},{kind}\n")


def build_causal_graph(
    quotes: Sequence[QuoteUpdate],
    arrivals: Sequence[ArrivalRecord],
    network: Network | None = None,
) -> CausalGraph:
    """Emission events, SIP arrival events, and the edges between them.

    Program edges chain each exchange's emissions and the SIP's arrivals in
    arrival order; message edges join each emission to its arrival.
    """
    if network is None and arrivals:
        raise ValueError("a network is needed to place SIP arrival events")
    events = [(q.event, q.exchange_id) for q in quotes]
    by_exchange: dict[str, list[QuoteUpdate]] = defaultdict(list)
    for q in sorted(quotes, key=lab_key):
        by_exchange[q.exchange_id].append(q)
    program = [
        (a.id, b.id) for chain in by_exchange.values() for a, b in zip(chain, chain[1:])
    ]
    arrival_ids = []
    message = []
    sip_node = network.sip_id if network is not None else "SIP"
    for rec in arrivals:
        ev = arrival_event(rec, network)
        events.append((ev, sip_node))
        arrival_ids.append(ev.id)
        message.append((rec.quote.id, ev.id))
    program += list(zip(arrival_ids, arrival_ids[1:]))
    return CausalGraph(events, program, message)


def happened_before(g: CausalGraph, a: str, b: str) -> bool:
    g.event(b)
    return b in g.descendants(a)


def concurrent(g: CausalGraph, a: str, b: str) -> bool:
    if a == b:
        raise ValueError("concurrency is defined for distinct events")
    return not happened_before(g, a, b) and not happened_before(g, b, a)


def lamport_clocks(g: CausalGraph) -> dict[str, int]:
    """Smallest clock assignment with C(a) < C(b) along every edge."""
    clock: dict[str, int] = {}
    preds: dict[str, list[str]] = defaultdict(list)
    for a, b, _ in g.edges:
        preds[b].append(a)
    for e in g.topological_order:
        clock[e] = 1 + max((clock[p] for p in preds[e]), default=0)
    return clock


@dataclass
class ConsistencyReport:
    edges_checked: int = 0
    boosts_checked: int = 0
    violations: list[tuple[str, str, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def causal_consistency_check(
    g: CausalGraph, boosts: Sequence[LorentzBoost], tolerance: float = 1e-6
) -> ConsistencyReport:
    """Confirm every edge keeps its direction in every boosted frame.

    A violation is recorded as (from, to, boost index, t'_to - t'_from).
    """
    report = ConsistencyReport(edges_checked=len(g.edges), boosts_checked=len(boosts))
    evs = g.events
    for k, boost in enumerate(boosts):
        for a, b, _ in g.edges:
            ea, eb = evs[a], evs[b]
            dt = boosted_time(boost, eb.x, eb.t) - boosted_time(boost, ea.x, ea.t)
            if dt < -tolerance:
                report.violations.append((a, b, k, dt))
    return report
