"""Run configuration: validation, defaults and JSON round-trip."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .objectives import objective_defaults
from .partition import ComponentLayout
from .worker import BMUF, MA, BmufParams

GOSSIP_MA = "gossip-MA"
GOSSIP_BMUF = "gossip-BMUF"
LOCAL_MA = "local-MA"
LOCAL_BMUF = "local-BMUF"
SIMPLE_MA = "simple-MA"
CENTRAL_BMUF = "central-BMUF-NBM"
CENTRAL_MA = "central-MA"
SINGLE_SGD = "single-SGD"

ALGORITHMS = (
    GOSSIP_MA, GOSSIP_BMUF, LOCAL_MA, LOCAL_BMUF, SIMPLE_MA, CENTRAL_BMUF, CENTRAL_MA, SINGLE_SGD,
)
BLOCK_ALGORITHMS = (GOSSIP_MA, GOSSIP_BMUF, LOCAL_MA, LOCAL_BMUF, CENTRAL_BMUF, CENTRAL_MA)
CENTRAL_ALGORITHMS = (CENTRAL_BMUF, CENTRAL_MA)

# Sync-period presets: every component every 8 steps, or embedding shards
# every 128 steps and the remaining groups every 16 steps.
SYNC_PRESETS = {"8": (8,), "16,128": (16, 128)}

RECORD_EVERY_STEP_LIMIT = 10_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LearningRate:
    """``alpha_t = initial * decay ** ((t - 1) // interval)``."""

    initial: float = 0.1
    decay: float = 1.0
    interval: int = 1

    def __call__(self, t: int) -> float:
        if self.decay == 1.0:
            return self.initial
        return self.initial * self.decay ** ((t - 1) // self.interval)


@dataclass
class RunConfig:
    algorithm: str = GOSSIP_BMUF
    n: int = 4
    p: int = 1
    q: int | None = None
    T: int = 100
    seed: int = 0
    trials: int = 1
    alpha: LearningRate = field(default_factory=LearningRate)
    eta: float = 0.9
    zeta: float = 1.0
    components: list[dict] | None = None
    objective: dict = field(default_factory=lambda: {"kind": "quadratic"})
    theta0: list[float] | None = None
    init_perturbation: float = 0.0
    single_sgd_batches: str = "matched"
    name: str | None = None

    def __post_init__(self):
        if isinstance(self.alpha, (int, float)):
            self.alpha = LearningRate(float(self.alpha))
        elif isinstance(self.alpha, dict):
            self.alpha = LearningRate(**self.alpha)
        try:
            self.objective = objective_defaults(self.objective)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.validate()

    # ------------------------------------------------------------------
    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.p < 0:
            raise ConfigError(f"p must be >= 0, got {self.p}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.alpha.initial < 0 or self.alpha.decay <= 0 or self.alpha.interval < 1:
            raise ConfigError(f"invalid learning-rate schedule {self.alpha}")
        if self.single_sgd_batches not in ("matched", "steps"):
            raise ConfigError("single_sgd_batches must be 'matched' or 'steps'")
        if self.init_perturbation < 0:
            raise ConfigError("init_perturbation must be >= 0")
        try:
            BmufParams(self.eta, self.zeta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        degree = min(2 * self.p, self.n - 1)
        if self.q is not None:
            if self.q < 0:
                raise ConfigError(f"q must be >= 0, got {self.q}")
            if self.q > 2 * self.p:
                raise ConfigError(f"q={self.q} violates q <= 2p (p={self.p})")
            if self.q > degree:
                raise ConfigError(f"q={self.q} violates q <= min(2p, n-1) = {degree}")
        if self.algorithm in (GOSSIP_MA, GOSSIP_BMUF) and self.q is None:
            raise ConfigError(f"{self.algorithm} requires q (number of gossip neighbors)")
        if self.algorithm in (LOCAL_MA, LOCAL_BMUF) and self.q is not None and self.q != degree:
            raise ConfigError(f"{self.algorithm} requires q = min(2p, n-1) = {degree}, got q={self.q}")
        if self.theta0 is not None and len(self.theta0) != self.dim_hint():
            raise ConfigError(f"theta0 has length {len(self.theta0)}, objective dimension is {self.dim_hint()}")
        try:
            self.layout_for(self.dim_hint())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def dim_hint(self) -> int:
        obj = self.objective
        if obj.get("eigenvalues") is not None:
            return len(obj["eigenvalues"])
        return int(obj.get("dim", 10))

    # ------------------------------------------------------------------
    @property
    def effective_q(self) -> int:
        """Neighbors averaged at each sync event."""
        if self.algorithm in CENTRAL_ALGORITHMS or self.algorithm == SIMPLE_MA:
            return self.n - 1
        if self.algorithm in (LOCAL_MA, LOCAL_BMUF):
            return min(2 * self.p, self.n - 1)
        if self.algorithm == SINGLE_SGD:
            return 0
        return self.q

    def bmuf_params(self) -> BmufParams:
        mode = BMUF if self.algorithm in (GOSSIP_BMUF, LOCAL_BMUF, CENTRAL_BMUF) else MA
        return BmufParams(self.eta, self.zeta, mode)

    def layout_for(self, dim: int) -> ComponentLayout:
        if self.components is None:
            return ComponentLayout.single(dim, 1)
        comps = self.components
        if isinstance(comps, dict) and "preset" in comps:
            periods = SYNC_PRESETS.get(str(comps["preset"]))
            if periods is None:
                raise ValueError(f"unknown sync preset {comps['preset']!r}")
            lengths = comps.get("lengths") or _even_lengths(dim, len(periods))
            return ComponentLayout.from_lengths(lengths, periods)
        lengths = [c["length"] for c in comps]
        if sum(lengths) != dim:
            raise ValueError(f"component lengths sum to {sum(lengths)}, parameter dimension is {dim}")
        return ComponentLayout.from_lengths(
            lengths, [c.get("sync_period", 1) for c in comps], [c.get("name", f"c{i}") for i, c in enumerate(comps)]
        )

    @property
    def label(self) -> str:
        return self.name or self.algorithm

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        """Every field written out explicitly; ``from_dict`` of this reproduces the run."""
        return {
            "name": self.name,
            "algorithm": self.algorithm,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "T": self.T,
            "seed": self.seed,
            "trials": self.trials,
            "alpha": {"initial": self.alpha.initial, "decay": self.alpha.decay, "interval": self.alpha.interval},
            "eta": self.eta,
            "zeta": self.zeta,
            "components": copy.deepcopy(self.components),
            "objective": copy.deepcopy(self.objective),
            "theta0": None if self.theta0 is None else list(self.theta0),
            "init_perturbation": self.init_perturbation,
            "single_sgd_batches": self.single_sgd_batches,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if d.get("alpha") is None:
            d.pop("alpha", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d)


def _even_lengths(dim: int, parts: int) -> list[int]:
    base, extra = divmod(dim, parts)
    if base == 0:
        raise ValueError(f"cannot split dimension {dim} into {parts} components")
    return [base + (1 if i < extra else 0) for i in range(parts)]
