"""Convergence bound for Simple MA on strongly convex objectives, and its empirical check."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

MIN_TRIALS = 30
PASS_FRACTION = 0.95


class StatisticalPowerError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    mu: float
    L_const: float
    alpha: float
    n: int
    sigma2: float
    init_dist: float

    def __post_init__(self):
        if not 0 < self.mu <= self.L_const:
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L_const}")
        limit = 2.0 / (self.mu + self.L_const)
        # relative slack absorbs the rounding in alpha = 2/(mu+L) written as a decimal
        if not 0 < self.alpha <= limit * (1 + 1e-12):
            raise ValueError(
                f"step size alpha={self.alpha} violates 0 < alpha <= 2/(mu+L) = {limit}"
            )
        if self.n < 1 or self.sigma2 < 0 or self.init_dist < 0:
            raise ValueError("need n >= 1, sigma2 >= 0 and init_dist >= 0")

    @property
    def rate(self) -> float:
        """Per-step contraction ``1 - 2 alpha mu L / (mu + L)``, clipped at 0."""
        r = 1.0 - 2.0 * self.alpha * self.mu * self.L_const / (self.mu + self.L_const)
        return max(r, 0.0)

    @property
    def bias(self) -> float:
        """Non-vanishing floor ``n (mu + L) / (2 mu L) alpha sigma2``."""
        return self.n * (self.mu + self.L_const) / (2.0 * self.mu * self.L_const) * self.alpha * self.sigma2


def ma_bound(params: BoundParams, t) -> float | np.ndarray:
    """Upper bound on E|theta_t - theta* 1|^2 after ``t`` Simple MA steps."""
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValueError("step index must be >= 0")
    out = params.rate ** t * params.init_dist + params.bias
    return float(out) if out.ndim == 0 else out


def steady_state_sq_dist(eigenvalues, alpha: float, sigma2: float, n: int) -> float:
    """Exact stationary E|theta_t - theta* 1|^2 of Simple MA on a noisy quadratic.

    With isotropic noise of total variance ``sigma2`` over ``d`` coordinates,
    each eigenmode ``lam`` of the averaged error is an AR(1) process with
    coefficient ``1 - alpha*lam`` driven by noise of variance
    ``alpha^2 sigma2 / (d n)``. Every worker then adds its own fresh noise:

        sum_lam (1 - alpha lam)^2 alpha s / (lam (2 - alpha lam)) + n alpha^2 sigma2,

    with ``s = sigma2 / d``. Requires ``0 < alpha lam < 2`` for every mode.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(alpha * lam <= 0) or np.any(alpha * lam >= 2):
        raise ValueError("need 0 < alpha * lambda < 2 for every eigenvalue")
    s = sigma2 / len(lam)
    mean_part = np.sum((1 - alpha * lam) ** 2 * alpha * s / (lam * (2 - alpha * lam)))
    return float(mean_part + n * alpha**2 * sigma2)


@dataclass
class BoundReport:
    steps: list[int]
    trial_mean: list[float]
    bound: list[float]
    passed: list[bool]
    slack: float
    trials: int
    pass_fraction: float
    steady_state_mean: float
    bias_term: float
    excursions: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.pass_fraction >= PASS_FRACTION

    def to_json(self, path=None) -> str:
        d = asdict(self)
        d["ok"] = self.ok
        text = json.dumps(d, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def table(self, max_rows: int = 20) -> str:
        lines = [
            f"trials={self.trials} slack={self.slack:.4f} pass_fraction={self.pass_fraction:.4f} "
            f"steady_state_mean={self.steady_state_mean:.6g} bias_term={self.bias_term:.6g}",
            f"{'step':>8} {'trial_mean':>14} {'bound':>14} {'pass':>5}",
        ]
        stride = max(1, math.ceil(len(self.steps) / max_rows))
        idx = list(range(0, len(self.steps), stride))
        if idx[-1] != len(self.steps) - 1:
            idx.append(len(self.steps) - 1)
        for j in idx:
            lines.append(
                f"{self.steps[j]:>8d} {self.trial_mean[j]:>14.6g} {self.bound[j]:>14.6g} "
                f"{'yes' if self.passed[j] else 'NO':>5}"
            )
        if self.excursions:
            lines.append(f"excursions at steps: {self.excursions[:20]}{' ...' if len(self.excursions) > 20 else ''}")
        return "\n".join(lines)


def check_bound(metrics: Sequence, params: BoundParams, slack: float | None = None) -> BoundReport:
    """Compare the trial-mean squared distance with the bound at every recorded step.

    A step passes when ``mean <= bound * (1 + slack)``; the default slack is
    ``4 / sqrt(trials)``. Individual excursions are listed, not raised.
    """
    trials = len(metrics)
    if trials < MIN_TRIALS:
        raise StatisticalPowerError(f"need at least {MIN_TRIALS} trials for a bound check, got {trials}")
    steps = metrics[0].steps
    for m in metrics[1:]:
        if m.steps != steps:
            raise ValueError("trials recorded different steps; they must share one config")
    if slack is None:
        slack = 4.0 / math.sqrt(trials)
    sq = np.array([m.sq_dist for m in metrics], dtype=np.float64)
    mean = sq.mean(axis=0)
    bound = np.asarray(ma_bound(params, np.asarray(steps)), dtype=np.float64)
    passed = mean <= bound * (1.0 + slack)
    tail = max(1, int(round(0.1 * len(steps))))
    return BoundReport(
        steps=[int(s) for s in steps],
        trial_mean=mean.tolist(),
        bound=bound.tolist(),
        passed=passed.tolist(),
        slack=slack,
        trials=trials,
        pass_fraction=float(passed.mean()),
        steady_state_mean=float(mean[-tail:].mean()),
        bias_term=params.bias,
        excursions=[int(s) for s, ok in zip(steps, passed) if not ok],
    )
