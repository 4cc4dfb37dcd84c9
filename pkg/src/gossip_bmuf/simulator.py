"""Lockstep multi-worker engine for the gossip/local/central BMUF and MA family."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .config import (
    BLOCK_ALGORITHMS, CENTRAL_ALGORITHMS, RECORD_EVERY_STEP_LIMIT, SIMPLE_MA, SINGLE_SGD, RunConfig,
)
from .objectives import DataShard, build_oracle
from .partition import NumericalDivergence, check_finite, due_components
from .topology import DOMAIN_INIT, RingTopology, RngStream, sample_neighbors
from .worker import WorkerState, apply_sync, gossip_average, local_step

BYTES_PER_VALUE = 8
CSV_HEADER = ("step", "mean_loss", "sq_dist", "consensus_var", "cum_bytes")


@dataclass
class RunMetrics:
    """Per-recorded-step series plus the final all-worker average."""

    steps: list[int] = field(default_factory=list)
    mean_loss: list[float] = field(default_factory=list)
    sq_dist: list[float] = field(default_factory=list)
    consensus_var: list[float] = field(default_factory=list)
    cum_bytes: list[int] = field(default_factory=list)
    avg_model_loss: list[float] = field(default_factory=list)
    final_model: np.ndarray | None = None
    initial_sq_dist: float = float("nan")

    def record(self, step, thetas: np.ndarray, oracle, cum_bytes: int) -> None:
        self.steps.append(int(step))
        self.mean_loss.append(float(np.mean(oracle_losses(oracle, thetas))))
        self.sq_dist.append(sq_dist_to_optimum(oracle, thetas))
        self.consensus_var.append(consensus_variance(thetas))
        self.cum_bytes.append(int(cum_bytes))
        self.avg_model_loss.append(float(oracle.loss(final_model(thetas))))

    @property
    def final_loss(self) -> float:
        return self.mean_loss[-1]

    @property
    def final_avg_model_loss(self) -> float:
        return self.avg_model_loss[-1]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.steps, self.mean_loss, self.sq_dist, self.consensus_var, self.cum_bytes):
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), row[4]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "recorded_steps": len(self.steps),
            "final_loss": self.final_loss,
            "final_avg_model_loss": self.final_avg_model_loss,
            "final_sq_dist": self.sq_dist[-1],
            "final_consensus_var": self.consensus_var[-1],
            "total_bytes": self.cum_bytes[-1],
            "initial_sq_dist": self.initial_sq_dist,
            "final_model": [float(x) for x in self.final_model],
        }

    def identical(self, other: "RunMetrics") -> bool:
        """Bitwise equality of every series and of the final model."""
        series = ("steps", "mean_loss", "sq_dist", "consensus_var", "cum_bytes", "avg_model_loss")
        for name in series:
            a = np.asarray(getattr(self, name))
            b = np.asarray(getattr(other, name))
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return self.final_model.tobytes() == other.final_model.tobytes()


# ---------------------------------------------------------------------------
# metric helpers

def oracle_losses(oracle, thetas: np.ndarray) -> np.ndarray:
    if hasattr(oracle, "losses"):
        return oracle.losses(thetas)
    return np.array([oracle.loss(th) for th in thetas])


def sq_dist_to_optimum(oracle, thetas: np.ndarray) -> float:
    star = getattr(oracle, "theta_star", None)
    if star is None:
        return float("nan")
    return float(np.sum((thetas - star) ** 2))


def consensus_variance(thetas: np.ndarray) -> float:
    """Across-worker variance per coordinate, averaged over coordinates."""
    return float(np.mean(np.var(thetas, axis=0)))


def final_model(states: Sequence[WorkerState] | np.ndarray) -> np.ndarray:
    """Elementwise mean over workers, accumulated in worker-id order."""
    rows = [s.theta if isinstance(s, WorkerState) else s for s in states]
    acc = np.array(rows[0], dtype=np.float64, copy=True)
    for r in rows[1:]:
        acc += r
    acc /= len(rows)
    return acc


def comm_bytes(config: RunConfig, t: int, layout=None) -> int:
    """Bytes received by all workers at step ``t``.

    Gossip/local: ``n * q * len_i * 8`` per due component. Central variants are
    modeled as an all-gather, ``n * (n - 1) * len_i * 8``. Simple MA averages
    everything every step, so it pays the all-gather on the full vector.
    """
    if config.algorithm == SINGLE_SGD:
        return 0
    layout = layout or config.layout_for(config.dim_hint())
    n = config.n
    if config.algorithm == SIMPLE_MA:
        return n * (n - 1) * layout.dim * BYTES_PER_VALUE
    fan_in = n - 1 if config.algorithm in CENTRAL_ALGORITHMS else config.effective_q
    return sum(n * fan_in * layout[i].length * BYTES_PER_VALUE for i in due_components(layout, t))


def cumulative_comm_bytes(config: RunConfig, t: int) -> int:
    layout = config.layout_for(config.dim_hint())
    return sum(comm_bytes(config, s, layout) for s in range(1, t + 1))


def trial_seed(seed: int, trial: int) -> int:
    """Seed for trial ``trial`` of a sweep, a pure function of (seed, trial)."""
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, dtype=np.uint64)[0])


@lru_cache(maxsize=16)
def _cached_oracle(key: str):
    return build_oracle(json.loads(key))


def oracle_for(config: RunConfig):
    return _cached_oracle(json.dumps(config.objective, sort_keys=True))


def _should_record(layout, t: int, T: int) -> bool:
    if T <= RECORD_EVERY_STEP_LIMIT or t == T:
        return True
    return bool(due_components(layout, t))


def initial_models(config: RunConfig, oracle, run_seed: int) -> list[np.ndarray]:
    base = np.zeros(oracle.dim) if config.theta0 is None else np.asarray(config.theta0, dtype=np.float64)
    if base.shape != (oracle.dim,):
        raise ValueError(f"theta0 has shape {base.shape}, objective dimension is {oracle.dim}")
    if config.init_perturbation == 0.0:
        return [base.copy() for _ in range(config.n)]
    out = []
    for k in range(config.n):
        rng = RngStream(run_seed, k, domain=DOMAIN_INIT).generator()
        out.append(base + config.init_perturbation * rng.standard_normal(oracle.dim))
    return out


# ---------------------------------------------------------------------------
# Algorithm 1 family

class GossipSimulator:
    """Step-at-a-time engine for the block-synchronous algorithms.

    Each step runs three phases: every worker takes a local SGD step (A),
    all parameters are snapshotted (B), then each due component is averaged
    with the sampled neighbors' snapshots and filtered (C). Phases A and C may
    run on a thread pool; nothing inside a phase depends on scheduling order.
    """

    def __init__(self, config: RunConfig, trial: int = 0, threads: int = 1, oracle=None):
        if config.algorithm not in BLOCK_ALGORITHMS:
            raise ValueError(f"{config.algorithm} is not a block-synchronous algorithm")
        self.config = config
        self.oracle = oracle if oracle is not None else oracle_for(config)
        self.layout = config.layout_for(self.oracle.dim)
        self.params = config.bmuf_params()
        self.central = config.algorithm in CENTRAL_ALGORITHMS
        self.q = config.effective_q
        self.topology = RingTopology(config.n, config.p)
        if not self.central and self.q > self.topology.degree:
            raise ValueError(f"q={self.q} exceeds ring degree {self.topology.degree}")
        self.run_seed = trial_seed(config.seed, trial)
        self.shards = [DataShard(self.oracle, self.run_seed, k, config.n) for k in range(config.n)]
        self.states = [
            WorkerState.create(k, self.layout, th0)
            for k, th0 in enumerate(initial_models(config, self.oracle, self.run_seed))
        ]
        self.threads = max(1, int(threads))
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        self.t = 0
        self.cum_bytes = 0

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _map(self, fn, items):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    @property
    def thetas(self) -> np.ndarray:
        return np.stack([s.theta for s in self.states])

    def local_phase(self, t: int) -> None:
        alpha = self.config.alpha(t)

        def work(k):
            st = self.states[k]
            batch = self.shards[k].next_batch()
            local_step(st, self.oracle.grad(st.theta, batch), alpha, t)

        self._map(work, range(self.config.n))

    def select_neighbors(self, k: int, i: int, t: int) -> list[int]:
        if self.central:
            return [j for j in range(self.config.n) if j != k]
        sync_index = t // self.layout[i].sync_period
        return sample_neighbors(self.topology, k, self.q, RngStream(self.run_seed, k, i, sync_index))

    def sync_phase(self, t: int) -> list[int]:
        due = due_components(self.layout, t)
        if not due:
            return due
        snapshot = self.thetas
        snapshot.setflags(write=False)
        shared = {}
        if self.central:
            for i in due:
                sl = self.layout.slice(i)
                shared[i] = final_model(snapshot[:, sl])

        def work(k):
            st = self.states[k]
            for i in due:
                sl = self.layout.slice(i)
                if self.central:
                    avg = shared[i].copy()
                else:
                    nbrs = self.select_neighbors(k, i, t)
                    avg = gossip_average(snapshot[k, sl], [snapshot[j, sl] for j in nbrs])
                apply_sync(st, i, avg, self.params)
            check_finite(st.theta, f"parameters of worker {k}", t)

        self._map(work, range(self.config.n))
        self.cum_bytes += comm_bytes(self.config, t, self.layout)
        return due

    def step(self) -> None:
        self.t += 1
        self.local_phase(self.t)
        self.sync_phase(self.t)

    def run(self) -> RunMetrics:
        metrics = RunMetrics(initial_sq_dist=sq_dist_to_optimum(self.oracle, self.thetas))
        try:
            for _ in range(self.config.T):
                self.step()
                if _should_record(self.layout, self.t, self.config.T):
                    metrics.record(self.t, self.thetas, self.oracle, self.cum_bytes)
        finally:
            self.close()
        metrics.final_model = final_model(self.states)
        return metrics


def run_gossip(config: RunConfig, trial: int = 0, threads: int = 1) -> RunMetrics:
    return GossipSimulator(config, trial, threads).run()


# ---------------------------------------------------------------------------
# Simple MA and the single-worker baseline

def run_simple_ma(config: RunConfig, trial: int = 0, threads: int = 1) -> RunMetrics:
    """Average every step; each worker steps from the average using its own gradient there."""
    if config.algorithm != SIMPLE_MA:
        raise ValueError(f"run_simple_ma needs algorithm {SIMPLE_MA!r}, got {config.algorithm!r}")
    oracle = oracle_for(config)
    layout = config.layout_for(oracle.dim)
    run_seed = trial_seed(config.seed, trial)
    shards = [DataShard(oracle, run_seed, k, config.n) for k in range(config.n)]
    thetas = np.stack(initial_models(config, oracle, run_seed))
    metrics = RunMetrics(initial_sq_dist=sq_dist_to_optimum(oracle, thetas))
    per_step_bytes = comm_bytes(config, 1, layout)
    cum = 0
    for t in range(1, config.T + 1):
        alpha = config.alpha(t)
        avg = final_model(thetas)
        new = np.empty_like(thetas)
        for k in range(config.n):
            g = oracle.grad(avg, shards[k].next_batch())
            check_finite(g, f"gradient of worker {k}", t)
            new[k] = avg - alpha * g
        thetas = new
        cum += per_step_bytes
        if _should_record(layout, t, config.T):
            metrics.record(t, thetas, oracle, cum)
    metrics.final_model = final_model(thetas)
    return metrics


def run_single_sgd(config: RunConfig, trial: int = 0, threads: int = 1) -> RunMetrics:
    """One worker on the unsharded stream.

    With ``single_sgd_batches == "matched"`` it consumes ``n`` mini-batches per
    recorded step (``T * n`` in total), matching the data budget of an
    ``n``-worker run; with ``"steps"`` it takes ``T`` steps.
    """
    if config.algorithm != SINGLE_SGD:
        raise ValueError(f"run_single_sgd needs algorithm {SINGLE_SGD!r}, got {config.algorithm!r}")
    oracle = oracle_for(config)
    layout = config.layout_for(oracle.dim)
    run_seed = trial_seed(config.seed, trial)
    shard = DataShard(oracle, run_seed, 0, 1)
    state = WorkerState.create(0, layout, initial_models(config.replace(n=1, q=None), oracle, run_seed)[0])
    per_round = config.n if config.single_sgd_batches == "matched" else 1
    metrics = RunMetrics(initial_sq_dist=sq_dist_to_optimum(oracle, state.theta[None]))
    for t in range(1, config.T + 1):
        alpha = config.alpha(t)
        for _ in range(per_round):
            local_step(state, oracle.grad(state.theta, shard.next_batch()), alpha, t)
        if _should_record(layout, t, config.T):
            metrics.record(t, state.theta[None], oracle, 0)
    metrics.final_model = state.theta.copy()
    return metrics


def run(config: RunConfig, trial: int = 0, threads: int = 1) -> RunMetrics:
    """Dispatch on ``config.algorithm``."""
    if config.algorithm == SIMPLE_MA:
        return run_simple_ma(config, trial, threads)
    if config.algorithm == SINGLE_SGD:
        return run_single_sgd(config, trial, threads)
    return run_gossip(config, trial, threads)


__all__ = [
    "CSV_HEADER", "GossipSimulator", "NumericalDivergence", "RunMetrics", "comm_bytes",
    "consensus_variance", "cumulative_comm_bytes", "final_model", "run", "run_gossip",
    "run_simple_ma", "run_single_sgd", "trial_seed",
]
