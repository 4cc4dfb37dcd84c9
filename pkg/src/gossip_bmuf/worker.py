"""Per-node state and updates: local SGD step, gossip averaging, BMUF filter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import ComponentLayout, check_finite

BMUF = "gossip-BMUF"
MA = "gossip-MA"


@dataclass(frozen=True)
class BmufParams:
    """Block momentum ``eta``, block learning rate ``zeta`` and update mode."""

    eta: float = 0.9
    zeta: float = 1.0
    mode: str = BMUF

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"block momentum must lie in [0, 1), got {self.eta}")
        if not self.zeta > 0.0:
            raise ValueError(f"block learning rate must be > 0, got {self.zeta}")
        if self.mode not in (BMUF, MA):
            raise ValueError(f"unknown update mode {self.mode!r}")


@dataclass
class WorkerState:
    worker_id: int
    layout: ComponentLayout
    theta: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    g_slot: np.ndarray
    # theta at each component's last completed sync, stored full-width so the
    # per-component slice lines up with the other slots
    anchors: np.ndarray
    sync_counts: list[int] = field(default_factory=list)

    @classmethod
    def create(cls, worker_id: int, layout: ComponentLayout, theta0) -> "WorkerState":
        theta0 = np.array(theta0, dtype=np.float64)
        if theta0.shape != (layout.dim,):
            raise ValueError(f"initial model has shape {theta0.shape}, layout expects ({layout.dim},)")
        return cls(
            worker_id=worker_id,
            layout=layout,
            theta=theta0.copy(),
            omega=theta0.copy(),
            delta=np.zeros_like(theta0),
            g_slot=np.zeros_like(theta0),
            anchors=theta0.copy(),
            sync_counts=[0] * len(layout),
        )


def local_step(state: WorkerState, grad: np.ndarray, alpha: float, step: int | None = None) -> None:
    """In-place SGD step ``theta -= alpha * grad`` over the whole vector."""
    if grad.shape != state.theta.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {state.theta.shape}")
    if alpha < 0:
        raise ValueError(f"learning rate must be >= 0, got {alpha}")
    check_finite(grad, f"gradient of worker {state.worker_id}", step)
    state.theta -= alpha * grad


def gossip_average(own: np.ndarray, neighbor_values: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of ``own`` and the neighbor copies.

    Accumulation runs self first, then neighbors in the order given (callers
    pass them sorted by node id), so the result is bit-reproducible.
    """
    acc = np.array(own, dtype=np.float64, copy=True)
    for v in neighbor_values:
        if v.shape != acc.shape:
            raise ValueError(f"neighbor component shape {v.shape} != own shape {acc.shape}")
        acc += v
    acc /= len(neighbor_values) + 1
    return acc


def bmuf_filter(state: WorkerState, i: int, avg: np.ndarray, params: BmufParams) -> None:
    """Blockwise model-update filtering with Nesterov block momentum on component ``i``.

    G = avg - anchor;  delta = eta*delta + zeta*G;  omega += delta;
    theta = omega + eta*delta;  anchor = theta.
    """
    sl = state.layout.slice(i)
    if avg.shape != state.theta[sl].shape:
        raise ValueError(f"averaged component has shape {avg.shape}, expected {state.theta[sl].shape}")
    eta, zeta = params.eta, params.zeta
    anchor = state.anchors[sl]
    omega = state.omega[sl]
    delta_old = state.delta[sl]

    g = avg - anchor
    delta = eta * delta_old + zeta * g
    # omega + delta, grouped as avg + correction: the correction is exactly zero
    # when eta == 0, zeta == 1 and omega == anchor, so the filter then returns
    # avg bit-for-bit (plain model averaging).
    correction = (omega - anchor) + eta * delta_old + (zeta - 1.0) * g
    omega_new = avg + correction

    state.g_slot[sl] = g
    state.delta[sl] = delta
    state.omega[sl] = omega_new
    state.theta[sl] = omega_new + eta * delta
    state.anchors[sl] = state.theta[sl]
    state.sync_counts[i] += 1


def ma_update(state: WorkerState, i: int, avg: np.ndarray) -> None:
    sl = state.layout.slice(i)
    if avg.shape != state.theta[sl].shape:
        raise ValueError(f"averaged component has shape {avg.shape}, expected {state.theta[sl].shape}")
    state.theta[sl] = avg
    state.anchors[sl] = avg
    state.sync_counts[i] += 1


def apply_sync(state: WorkerState, i: int, avg: np.ndarray, params: BmufParams) -> None:
    if params.mode == BMUF:
        bmuf_filter(state, i, avg, params)
    else:
        ma_update(state, i, avg)
