"""k-symmetric ring topology and reproducible neighbor sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream domains keep gossip sampling, data sampling and initial perturbations
# statistically independent even when their remaining key fields coincide.
DOMAIN_GOSSIP = 0
DOMAIN_DATA = 1
DOMAIN_INIT = 2


@dataclass(frozen=True)
class RingTopology:
    """``n`` nodes on a ring, each linked to the ``k`` nearest nodes on either side."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        if self.k < 0:
            raise ValueError(f"symmetric-degree must be >= 0, got {self.k}")

    @property
    def degree(self) -> int:
        return min(2 * self.k, self.n - 1)

    def neighbors(self, i: int) -> list[int]:
        return neighbors(self, i)


def neighbors(topo: RingTopology, i: int) -> list[int]:
    """Sorted neighbor ids of node ``i``.

    Offsets that collide modulo ``n`` (when ``n <= 2k``) are merged, so the
    degree is ``min(2k, n - 1)``.
    """
    if not 0 <= i < topo.n:
        raise ValueError(f"node id {i} out of range for n={topo.n}")
    found = set()
    for offset in range(1, topo.k + 1):
        found.add((i - offset) % topo.n)
        found.add((i + offset) % topo.n)
    found.discard(i)
    return sorted(found)


@dataclass(frozen=True)
class RngStream:
    """Identity of a deterministic random stream.

    The same identity always yields the same draws, independent of the order
    in which streams are created or which thread consumes them.
    """

    seed: int
    worker: int
    component: int = 0
    sync_index: int = 0
    domain: int = DOMAIN_GOSSIP

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.seed,
            spawn_key=(self.domain, self.worker, self.component, self.sync_index),
        )
        return np.random.Generator(np.random.PCG64(ss))


def sample_neighbors(
    topo: RingTopology, i: int, q: int, stream: RngStream | np.random.Generator
) -> list[int]:
    """Draw ``q`` distinct neighbors of ``i`` uniformly without replacement.

    Result is sorted ascending. ``q`` equal to the degree returns the full
    neighbor list.
    """
    nbrs = neighbors(topo, i)
    if q < 0 or q > len(nbrs):
        raise ValueError(
            f"cannot sample q={q} neighbors of node {i}: degree is {len(nbrs)} "
            f"(n={topo.n}, k={topo.k}); q must satisfy 0 <= q <= min(2k, n-1)"
        )
    if q == 0:
        return []
    rng = stream.generator() if isinstance(stream, RngStream) else stream
    picked = rng.choice(len(nbrs), size=q, replace=False)
    return sorted(nbrs[j] for j in picked)
