"""Straight-line transcription of the per-node gossip-MA / gossip-BMUF loop.

Test oracle only: no component views, no snapshot helper, no shared update
code with the engine. It reuses the engine's random-stream identities so both
see the same mini-batches and the same neighbor picks.
"""

import numpy as np

from gossip_bmuf.objectives import DataShard
from gossip_bmuf.simulator import trial_seed
from gossip_bmuf.topology import RingTopology, RngStream, sample_neighbors


def reference_run(oracle, n, p, q, T, lengths, periods, alpha, eta, zeta, bmuf, seed, theta0=None):
    d = sum(lengths)
    run_seed = trial_seed(seed, 0)
    topo = RingTopology(n, p)
    shards = [DataShard(oracle, run_seed, k, n) for k in range(n)]
    starts = [0]
    for length in lengths[:-1]:
        starts.append(starts[-1] + length)
    th0 = np.zeros(d) if theta0 is None else np.asarray(theta0, float)

    theta = [th0.copy() for _ in range(n)]
    omega = [th0.copy() for _ in range(n)]
    delta = [np.zeros(d) for _ in range(n)]
    prev = [th0.copy() for _ in range(n)]  # theta at the start of each component's block
    history = []
    for t in range(1, T + 1):
        for k in range(n):
            g = oracle.grad(theta[k], shards[k].next_batch())
            theta[k] = theta[k] - alpha * g
        old = [x.copy() for x in theta]
        for k in range(n):
            for i, (a, length, H) in enumerate(zip(starts, lengths, periods)):
                if t % H != 0:
                    continue
                b = a + length
                picks = sample_neighbors(topo, k, q, RngStream(run_seed, k, i, t // H))
                avg = np.mean([old[k][a:b]] + [old[j][a:b] for j in picks], axis=0)
                if bmuf:
                    G = avg - prev[k][a:b]
                    delta[k][a:b] = eta * delta[k][a:b] + zeta * G
                    omega[k][a:b] = omega[k][a:b] + delta[k][a:b]
                    theta[k][a:b] = omega[k][a:b] + eta * delta[k][a:b]
                else:
                    theta[k][a:b] = avg
                prev[k][a:b] = theta[k][a:b]
        history.append(np.array(theta))
    return np.array(history)
