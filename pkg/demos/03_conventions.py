"""Same two quotes, four answers to "what is the best bid right now?".

Run:  python demos/03_conventions.py
"""

from nbbo_frames.analysis import nbbo_divergence
from nbbo_frames.consolidation import (
    ArrivalOrder,
    BoostedFrameEmission,
    LabFrameEmission,
    UncertaintyInterval,
    consolidate,
    consolidate_interval,
    deliver,
)
from nbbo_frames.quotes import theorem1_fixture, theorem1_network
from nbbo_frames.spacetime import flip_boost

net = theorem1_network()
alpha, beta = theorem1_fixture(net)
arrivals = deliver([alpha, beta], net)
for r in arrivals:
    print(f"{r.quote.id:>5} emitted {r.quote.t:6.1f} µs, reaches the SIP at {r.arrival_time:7.2f} µs")

conventions = [
    ArrivalOrder(),
    LabFrameEmission(),
    BoostedFrameEmission(flip_boost(alpha.event, beta.event)),
    UncertaintyInterval(100.0),
]
series = {}
for conv in conventions:
    s = consolidate(arrivals, conv)
    series[conv.name] = s
    steps = ", ".join(f"t={x.t:.2f}: bid {x.best_bid[0]}@{x.best_bid[1]}" for x in s)
    print(f"\n{conv.describe()}\n  {steps}")

rep = nbbo_divergence(series["arrival_order"], series["lab_frame"], horizon=1000.0)
print(f"\narrival order vs lab frame disagree on {rep.spans} ({rep.disagreement_fraction:.1%} of 1 ms)")

# With ±100 µs clocks neither quote can be placed first, so both bids are possible.
inbbo = consolidate_interval(arrivals, 100.0)
for s in inbbo.samples:
    print(f"interval view from t={s.t:g}: possible best bids {sorted(s.possible_best_bids)}")
