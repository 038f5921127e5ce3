"""Command-line front end: ``nbbo-frames {simulate,flip,report,races}``.

Exit codes: 0 success, 2 configuration or usage error, 3 physics precondition
violation (e.g. asking to flip a pair whose order is absolute).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import (
    RACE_COLUMNS,
    TIMESCALE_COLUMNS,
    FeedModel,
    detect_races,
    nbbo_divergence,
    race_summary,
    timescale_rows,
)
from .config import ConfigError, ScenarioConfig, load_config
from .consolidation import CausalityViolation, consolidate, deliver, es_conditions
from .network import Network
from .quotes import QuoteUpdate, ScenarioError
from .spacetime import (
    C,
    IntervalClass,
    NotSpacelike,
    classify,
    flip_boost,
    interval_squared,
    light_time,
    medium_time,
    ordering_in_frame,
    separation,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3

ARRIVAL_COLUMNS = (
    "event_id", "exchange_id", "side", "price_ticks", "size", "t_emit_us", "delay_us", "arrival_us",
)
BUDGET_COLUMNS = ("pair", "distance_km", "light_us", "fiber_us", "link_us")
TIMESCALE_DISTANCES = tuple(range(0, 1301, 10))


class _Outputs:
    """Collects output files in memory, then writes them in a fixed order."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.files[name] = buf.getvalue()

    def json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: Path, config: ScenarioConfig) -> dict:
        out_dir.mkdir(parents=True, exist_ok=True)
        checksums = {}
        for name in sorted(self.files):
            data = self.files[name].encode()
            (out_dir / name).write_bytes(data)
            checksums[name] = hashlib.sha256(data).hexdigest()
        manifest = {
            "config_hash": config.digest(),
            "tool_version": __version__,
            "outputs": checksums,
        }
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return v


def _load(args) -> tuple[ScenarioConfig, Network]:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg, cfg.network.build()


def _out_dir(args, cfg: ScenarioConfig) -> Path | None:
    if args.out:
        return Path(args.out)
    if cfg.output_dir:
        # relative to the working directory, never the (possibly installed) config folder
        return Path(cfg.output_dir)
    return None


def _horizon_quotes(cfg: ScenarioConfig, network: Network) -> list[QuoteUpdate]:
    return [q for q in cfg.load_quotes(network) if q.t < cfg.horizon_us]


# --- simulate ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg, network = _load(args)
    cfg.validate()
    quotes = _horizon_quotes(cfg, network)
    arrivals = deliver(quotes, network)
    conventions = cfg.resolve_conventions(cfg.load_quotes(network))
    if args.convention:
        conventions = [(n, c) for n, c in conventions if n in args.convention]
        if not conventions:
            raise ConfigError("--convention matched none of the configured conventions")
    out = _Outputs()
    out.csv(
        "arrivals.csv", ARRIVAL_COLUMNS,
        [
            (r.quote.id, r.exchange_id, r.quote.side.value, r.quote.price, r.quote.size,
             repr(r.quote.t), repr(r.delay), repr(r.arrival_time))
            for r in arrivals
        ],
    )
    series = {}
    for name, conv in conventions:
        s = consolidate(arrivals, conv)
        series[name] = s
        out.csv(f"nbbo_{name}.csv", ("t_us", "bid_ticks", "bid_venue", "ask_ticks", "ask_venue", "crossed"),
                [[_cell(v) for v in rec] for rec in s.records()])
    names = list(series)
    divergence = {}
    for other in names[1:]:
        rep = nbbo_divergence(series[names[0]], series[other], cfg.horizon_us)
        divergence[f"{names[0]}__vs__{other}"] = rep.as_dict()
    out.json("divergence.json", divergence)
    es = es_conditions(quotes, network, conventions[0][1], cfg.epsilon_km2)
    out.json("es_conditions.json", es.as_dict())

    out_dir = _out_dir(args, cfg)
    if out_dir is None:
        raise ConfigError("no output directory: pass --out or set outputs.dir")
    manifest = out.write(out_dir, cfg)
    print(f"{cfg.name}: {len(quotes)} quotes, {len(names)} conventions -> {out_dir}")
    for key, rep in divergence.items():
        spans = ", ".join(f"[{w['start_us']:g}, {w['end_us']:g})" for w in rep["windows"]) or "none"
        print(f"  {key}: fraction {rep['disagreement_fraction']:.6g}, windows {spans}")
    print(f"  manifest config_hash {manifest['config_hash'][:16]}")
    return EXIT_OK


# --- flip ---------------------------------------------------------------------------

def cmd_flip(args) -> int:
    if args.event_a == args.event_b:
        print("error: flip needs two distinct events", file=sys.stderr)
        return EXIT_CONFIG
    cfg, network = _load(args)
    by_id = {q.id: q for q in cfg.load_quotes(network)}
    missing = [e for e in (args.event_a, args.event_b) if e not in by_id]
    if missing:
        raise ConfigError(f"unknown event id(s): {', '.join(missing)}")
    a, b = by_id[args.event_a].event, by_id[args.event_b].event
    s2 = interval_squared(a, b)
    d = separation(a, b)
    cls = classify(a, b, cfg.epsilon_km2)
    print(f"a: {a.id} t={a.t:g} µs   b: {b.id} t={b.t:g} µs")
    print(f"separation: {d:.6f} km   |Δt| = {abs(a.t - b.t):.6f} µs   d/c = {light_time(d):.6f} µs")
    print(f"interval_squared: {s2:.6f} km²   classification: {cls.value}")
    print(f"lab frame order: {ordering_in_frame(a, b).value}")
    if cls is not IntervalClass.SPACELIKE:
        print(
            f"no flip: the pair is {cls.value}; a frame-dependent order requires "
            f"|Δt| < d/c ({abs(a.t - b.t):.6f} µs vs {light_time(d):.6f} µs)",
            file=sys.stderr,
        )
        return EXIT_PHYSICS
    boost = flip_boost(a, b, args.margin, cfg.epsilon_km2)
    bx, by, bz = boost.beta
    print(f"flip boost: v = ({bx:.6f}, {by:.6f}, {bz:.6f})c   speed = {boost.speed / C:.6f}c   gamma = {boost.gamma:.6f}")
    print(f"boosted frame order: {ordering_in_frame(a, b, boost).value}")
    return EXIT_OK


# --- report ---------------------------------------------------------------------------

def latency_budget(network: Network) -> list[tuple[str, float, float, float, float]]:
    rows = []
    for link in network.links:
        dist = network.effective_distance(link)
        rows.append((link.name, dist, light_time(dist), medium_time(dist, 1.5), network.propagation_delay(link)))
    return rows


def cmd_report(args) -> int:
    cfg, network = _load(args)
    rows = latency_budget(network)
    print("pair, distance_km, light_us, fiber_us")
    for name, dist, lt, ft, _ in rows:
        print(f"{name}, {dist:g}, {lt:.0f}, {ft:.0f}")
    out_dir = _out_dir(args, cfg)
    if out_dir is not None:
        out = _Outputs()
        out.csv("latency_budget.csv", BUDGET_COLUMNS, [[_cell(v) for v in r] for r in rows])
        feeds = cfg.feeds or FeedModel()
        distances = sorted(set(TIMESCALE_DISTANCES) | {r[1] for r in rows})
        out.csv("timescales.csv", TIMESCALE_COLUMNS,
                [[_cell(float(v)) for v in r] for r in timescale_rows(distances, feeds)])
        out.write(out_dir, cfg)
    return EXIT_OK


# --- races -----------------------------------------------------------------------------

def cmd_races(args) -> int:
    cfg, network = _load(args)
    if cfg.feeds is None:
        raise ConfigError("races needs a 'feeds' block (delta_direct_us, delta_sip_us, reaction_us)")
    quotes = _horizon_quotes(cfg, network)
    arrivals = deliver(quotes, network)
    races = detect_races(arrivals, cfg.feeds)
    summary = race_summary(races, cfg.horizon_us, cfg.n_securities)
    feeds = cfg.feeds
    print(f"feeds: direct {feeds.delta_direct:g} µs, SIP {feeds.delta_sip:g} µs, reaction {feeds.reaction:g} µs")
    print(f"race window {feeds.window:g} µs, feed ratio {feeds.feed_ratio:.1f}:1")
    for key, value in summary.as_dict().items():
        print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")
    out_dir = _out_dir(args, cfg)
    if out_dir is not None:
        out = _Outputs()
        out.csv("races.csv", RACE_COLUMNS, [r.record() for r in races])
        out.json("race_summary.json", {**summary.as_dict(), "window_us": feeds.window, "feed_ratio": feeds.feed_ratio})
        out.write(out_dir, cfg)
    return EXIT_OK


# --- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbbo-frames", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, type=Path, help="scenario file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        if out:
            p.add_argument("--out", type=Path, help="output directory")

    p = sub.add_parser("simulate", help="deliver quotes and consolidate under each convention")
    common(p)
    p.add_argument("--convention", action="append", help="only this convention (repeatable)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flip", help="find a frame reversing the order of two events")
    common(p, out=False)
    p.add_argument("event_a")
    p.add_argument("event_b")
    p.add_argument("--margin", type=float, default=0.01)
    p.set_defaults(func=cmd_flip)

    p = sub.add_parser("report", help="latency budget and timescale tables")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("races", help="detect latency-arbitrage races")
    common(p)
    p.set_defaults(func=cmd_races)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, KeyError, LookupError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotSpacelike, CausalityViolation) as exc:
        print(f"physics precondition violated: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
