"""
Communication volume: gossip against all-gather
===============================================

Bytes received per sync are n * q * len * 8 for gossip and n * (n-1) * len * 8
when every worker gathers every other worker's component. Components with a
long sync period (here the 128-step "embedding" block) contribute rarely.
"""

from gossip_bmuf import RunConfig, cumulative_comm_bytes

components = [{"name": "embedding", "length": 4, "sync_period": 128},
              {"name": "rest", "length": 6, "sync_period": 16}]
objective = {"kind": "quadratic", "dim": 10}

for n, p, q in ((4, 1, 1), (8, 2, 2), (16, 3, 2)):
    gossip = RunConfig(algorithm="gossip-BMUF", n=n, p=p, q=q, T=1024, components=components, objective=objective)
    central = gossip.replace(algorithm="central-BMUF-NBM", q=None)
    g = cumulative_comm_bytes(gossip, 1024)
    c = cumulative_comm_bytes(central, 1024)
    print(f"n={n:>2} q={q}: gossip {g:>8} B, all-gather {c:>9} B, ratio {c / g:.2f} (= (n-1)/q = {(n - 1) / q:.2f})")
