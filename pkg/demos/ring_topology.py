"""
Ring topology and neighbor sampling
===================================

Every node on a k-symmetric ring talks to the k nearest nodes on each side.
At each sync event a node pulls from q of them, picked at random by a stream
keyed on (seed, worker, component, sync index).
"""

from collections import Counter

from gossip_bmuf import RingTopology, RngStream, neighbors, sample_neighbors

# 8 workers, symmetric-degree 2: four neighbors each
ring = RingTopology(n=8, k=2)
for i in range(ring.n):
    print(i, neighbors(ring, i))

# Small rings: offsets that wrap onto the same node are merged, so the degree
# is capped at n - 1.
print("n=3, k=2:", neighbors(RingTopology(3, 2), 0))

# Sampling q=2 of the 4 neighbors. The same stream identity replays the same
# picks; different components or sync events pick independently.
print(sample_neighbors(ring, 0, 2, RngStream(seed=0, worker=0, component=0, sync_index=1)))
print(sample_neighbors(ring, 0, 2, RngStream(seed=0, worker=0, component=0, sync_index=1)))
for comp in (0, 1):
    picks = [sample_neighbors(ring, 0, 2, RngStream(0, 0, comp, s)) for s in range(1, 6)]
    print(f"component {comp}, sync events 1-5:", picks)

# Each neighbor shows up in about half of the draws (q / 2k).
counts = Counter()
for s in range(5000):
    counts.update(sample_neighbors(ring, 0, 2, RngStream(0, 0, 0, s)))
print({j: round(c / 5000, 3) for j, c in sorted(counts.items())})

# q = 2k takes every neighbor: this is the local-MA / local-BMUF case.
print(sample_neighbors(ring, 0, 4, RngStream(0, 0)))
