"""Two quotes whose order depends on who is watching.

Beta is posted at exchange B at t = 0, alpha at exchange A 50 µs later, 43 km
away. Light needs 143 µs to cross, so no signal connects them and a moving
observer can see alpha first.

Run:  python demos/02_frame_flip.py
"""

from nbbo_frames.quotes import theorem1_fixture, theorem1_network
from nbbo_frames.spacetime import C, boost_event, classify, flip_boost, interval_squared, ordering_in_frame

alpha, beta = theorem1_fixture(theorem1_network())
a, b = alpha.event, beta.event

print(f"s² = {interval_squared(a, b):.1f} km² -> {classify(a, b).value}")
print(f"lab frame: {ordering_in_frame(a, b).value}")

boost = flip_boost(a, b)
print(f"\nboost at {boost.speed / C:.4f}c along the A->B axis")
for ev in (a, b):
    print(f"  {ev.id:>5}: t = {ev.t:7.2f} µs (lab)  ->  t' = {boost_event(boost, ev).t:8.2f} µs")
print(f"boosted frame: {ordering_in_frame(a, b, boost).value}")
