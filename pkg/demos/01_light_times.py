"""How long light and fiber take between the New Jersey clusters and Aurora.

Run:  python demos/01_light_times.py
"""

from nbbo_frames.analysis import DIRECT_FEED_US, SIP_LATENCY_US
from nbbo_frames.network import paper_network
from nbbo_frames.spacetime import light_time

net = paper_network()

print(f"{'pair':<22}{'km':>8}{'vacuum µs':>12}{'fiber µs':>11}")
for link in net.links:
    d = net.effective_distance(link)
    print(f"{link.name:<22}{d:>8.0f}{light_time(d):>12.1f}{net.propagation_delay(link):>11.1f}")

# The pinned distances are not the straight-line geometry. Compare with the chord.
geo = net.geometric_distance("MAHWAH", "CARTERET")
print(f"\nMahwah–Carteret chord from coordinates: {geo:.1f} km (pinned value 43 km)")

# Consolidated-feed latency dwarfs the light time across New Jersey.
print(f"SIP latency {SIP_LATENCY_US:g} µs is {SIP_LATENCY_US / light_time(43):.1f}x the 43 km light time;")
print(f"a {DIRECT_FEED_US:g} µs direct feed is {SIP_LATENCY_US / DIRECT_FEED_US:.1f}x faster than the SIP.")
