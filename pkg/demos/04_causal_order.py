"""Happened-before on a generated scenario, checked against light cones.

Run:  python demos/04_causal_order.py
"""

import itertools

import numpy as np

from nbbo_frames.causal import build_causal_graph, causal_consistency_check, concurrent, lamport_clocks
from nbbo_frames.consolidation import deliver
from nbbo_frames.network import paper_network
from nbbo_frames.quotes import StreamSpec, generate_streams, theorem1_fixture, theorem1_network
from nbbo_frames.spacetime import C, IntervalClass, LorentzBoost, classify

net = theorem1_network()
quotes = theorem1_fixture(net)
g = build_causal_graph(quotes, deliver(quotes, net), net)
print("edges:", *(f"{a} -> {b} ({k})" for a, b, k in g.edges), sep="\n  ")
print("Lamport clocks:", lamport_clocks(g))
print("alpha and beta concurrent:", concurrent(g, "alpha", "beta"))

net = paper_network()
specs = [StreamSpec(ex, seed, 500.0, 20_000.0) for seed, ex in enumerate(("CARTERET", "SECAUCUS", "AURORA"))]
quotes = generate_streams(specs, net)
g = build_causal_graph(quotes, deliver(quotes, net), net)

spacelike = [
    (p, q) for p, q in itertools.combinations(quotes, 2)
    if p.exchange_id != q.exchange_id and classify(p.event, q.event) is IntervalClass.SPACELIKE
]
print(f"\n{len(quotes)} quotes, {len(g.edges)} edges, {len(spacelike)} spacelike emission pairs")
print("all spacelike pairs concurrent:", all(concurrent(g, p.id, q.id) for p, q in spacelike))

rng = np.random.default_rng(0)
boosts = []
for _ in range(100):
    d = rng.normal(size=3)
    boosts.append(LorentzBoost(tuple(rng.uniform(0, 0.99) * C * d / np.linalg.norm(d))))
rep = causal_consistency_check(g, boosts)
print(f"{rep.edges_checked} edges x {rep.boosts_checked} frames: {len(rep.violations)} order violations")
