"""Deterministic simulation of gossip-BMUF and related decentralized averaging schemes."""

from .config import ALGORITHMS, ConfigError, LearningRate, RunConfig
from .objectives import DataShard, LogisticOracle, QuadraticOracle, build_oracle
from .partition import Component, ComponentLayout, NumericalDivergence, component_view, due_components
from .simulator import (
    GossipSimulator, RunMetrics, comm_bytes, cumulative_comm_bytes, final_model, run, run_gossip,
    run_simple_ma, run_single_sgd,
)
from .theory import BoundParams, BoundReport, StatisticalPowerError, check_bound, ma_bound, steady_state_sq_dist
from .topology import RingTopology, RngStream, neighbors, sample_neighbors
from .worker import BmufParams, WorkerState, bmuf_filter, gossip_average, local_step, ma_update

__version__ = "0.1.0"
