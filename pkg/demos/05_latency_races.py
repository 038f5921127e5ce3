"""Stale-quote races in the shipped calibration scenario.

Run:  python demos/05_latency_races.py
"""

from collections import Counter

from nbbo_frames.analysis import FeedModel, Winner, detect_races, race_summary
from nbbo_frames.config import load_config
from nbbo_frames.consolidation import deliver
from nbbo_frames.scenarios import scenario_path

cfg = load_config(scenario_path("race_calibration"))
net = cfg.network.build()
quotes = [q for q in cfg.load_quotes(net) if q.t < cfg.horizon_us]
arrivals = deliver(quotes, net)

feeds = cfg.feeds
print(f"direct feed {feeds.delta_direct:g} µs, SIP {feeds.delta_sip:g} µs: "
      f"window {feeds.window:g} µs, ratio {feeds.feed_ratio:.1f}:1")

races = detect_races(arrivals, feeds)
summary = race_summary(races, cfg.horizon_us, cfg.n_securities)
print(f"{summary.n_races} races, {summary.races_per_minute_per_security:.2f} per minute")
print(f"fast side wins {summary.fast_win_fraction:.1%} with jittered reaction time")
print("winners:", dict(Counter(r.winner.value for r in races)))

calm = FeedModel(feeds.delta_direct, feeds.delta_sip, feeds.reaction)
print(f"without jitter: fast wins {race_summary(detect_races(arrivals, calm), cfg.horizon_us).fast_win_fraction:.0%}")

first = next(r for r in races if r.winner is Winner.FAST)
print(f"\nexample: {first.trigger.id} ({first.trigger.side.value} {first.trigger.price}) "
      f"prices through {first.stale_quote.id} ({first.stale_quote.side.value} {first.stale_quote.price}), "
      f"profit {first.profit} tick-shares")
