"""Gradient oracles with known curvature constants, and per-worker data shards."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import DOMAIN_DATA, RngStream

_NOISE_CHUNK = 256


def random_rotation(dim: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a seeded QR factorization."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


class DataShard:
    """Deterministic mini-batch sampler for worker ``worker_id``.

    The ``t``-th batch drawn is a pure function of ``(seed, worker_id, t)``;
    noise is generated in chunks but consumed row by row, which yields the same
    values as drawing one row per step.
    """

    def __init__(self, oracle, seed: int, worker_id: int, n_workers: int = 1):
        self.oracle = oracle
        self.worker_id = worker_id
        self.n_workers = n_workers
        self.rng = RngStream(seed, worker_id, domain=DOMAIN_DATA).generator()
        self.indices = oracle.shard_indices(seed, worker_id, n_workers)
        self._buffer = None
        self._pos = 0
        self.draws = 0

    def next_noise(self) -> np.ndarray:
        if self._buffer is None or self._pos == len(self._buffer):
            self._buffer = self.rng.standard_normal((_NOISE_CHUNK, self.oracle.dim))
            self._pos = 0
        row = self._buffer[self._pos]
        self._pos += 1
        return row

    def next_batch(self):
        self.draws += 1
        return self.oracle.sample_batch(self)


@dataclass
class QuadraticOracle:
    """f(theta) = 1/2 (theta - theta*)^T A (theta - theta*), A = R diag(eigs) R^T.

    Stochastic gradients add isotropic Gaussian noise with ``E[xi^T xi] = sigma2``.
    """

    eigenvalues: np.ndarray
    theta_star: np.ndarray
    sigma2: float = 0.0
    rotation_seed: int = 0
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        self.theta_star = np.asarray(self.theta_star, dtype=np.float64)
        if self.eigenvalues.ndim != 1 or np.any(self.eigenvalues <= 0):
            raise ValueError("eigenvalues must be a 1-d list of positive numbers")
        if self.theta_star.shape != self.eigenvalues.shape:
            raise ValueError("optimum and eigenvalue list differ in dimension")
        if self.sigma2 < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.sigma2}")
        rot = random_rotation(self.dim, self.rotation_seed)
        a = (rot * self.eigenvalues) @ rot.T
        self.A = 0.5 * (a + a.T)
        self._noise_scale = np.sqrt(self.sigma2 / self.dim)

    @classmethod
    def log_spaced(cls, dim=10, mu=1.0, L=10.0, sigma2=0.0, rotation_seed=0, optimum_seed=None):
        eigs = np.geomspace(mu, L, dim)
        # endpoints pinned so mu and L are reported exactly
        eigs[0], eigs[-1] = mu, L
        if optimum_seed is None:
            theta_star = np.zeros(dim)
        else:
            theta_star = np.random.default_rng(optimum_seed).standard_normal(dim)
        return cls(eigs, theta_star, sigma2, rotation_seed)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def mu(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def L_const(self) -> float:
        return float(self.eigenvalues.max())

    def shard_indices(self, seed, worker_id, n_workers):
        return None

    def sample_batch(self, shard: DataShard):
        if self.sigma2 == 0.0:
            return None
        return self._noise_scale * shard.next_noise()

    def grad(self, theta: np.ndarray, batch=None) -> np.ndarray:
        g = self.A @ (theta - self.theta_star)
        if batch is not None:
            g = g + batch
        return g

    def loss(self, theta: np.ndarray) -> float:
        e = theta - self.theta_star
        return 0.5 * float(e @ self.A @ e)

    def losses(self, thetas: np.ndarray) -> np.ndarray:
        e = thetas - self.theta_star
        return 0.5 * np.einsum("ij,ij->i", e @ self.A, e)


class LogisticOracle:
    """L2-regularized logistic regression on a seeded synthetic dataset.

    Labels are in {-1, +1}. The reference optimum comes from a long full-batch
    gradient-descent run at construction time.
    """

    def __init__(self, n_samples=2000, dim=10, l2=0.01, batch_size=32, data_seed=0,
                 label_noise=0.1, ref_tol=1e-10, ref_max_iter=200_000):
        if l2 <= 0:
            raise ValueError(f"ridge coefficient must be > 0, got {l2}")
        self.n_samples, self._dim, self.l2 = n_samples, dim, l2
        self.batch_size = batch_size
        self.sigma2 = None
        rng = np.random.default_rng(data_seed)
        self.X = rng.standard_normal((n_samples, dim))
        w_true = rng.standard_normal(dim)
        flip = rng.random(n_samples) < label_noise
        y = np.sign(self.X @ w_true)
        y[y == 0] = 1.0
        self.y = np.where(flip, -y, y)

        smax = np.linalg.norm(self.X, 2)
        self.mu = l2
        self.L_const = smax**2 / (4.0 * n_samples) + l2
        self.theta_star = self._reference_optimum(ref_tol, ref_max_iter)

    @property
    def dim(self) -> int:
        return self._dim

    def _reference_optimum(self, tol, max_iter):
        w = np.zeros(self.dim)
        step = 1.0 / self.L_const
        for _ in range(max_iter):
            g = self.grad(w)
            if np.linalg.norm(g) < tol:
                break
            w = w - step * g
        return w

    def shard_indices(self, seed, worker_id, n_workers):
        perm = np.random.default_rng([seed, 7919]).permutation(self.n_samples)
        return np.array_split(perm, n_workers)[worker_id]

    def sample_batch(self, shard: DataShard):
        return shard.rng.choice(shard.indices, size=self.batch_size, replace=True)

    def grad(self, theta: np.ndarray, batch=None) -> np.ndarray:
        if batch is None:
            X, y = self.X, self.y
        else:
            X, y = self.X[batch], self.y[batch]
        z = y * (X @ theta)
        # d/dz log(1 + e^{-z}) = -sigmoid(-z)
        s = -y * _sigmoid(-z)
        return X.T @ s / len(y) + self.l2 * theta

    def loss(self, theta: np.ndarray) -> float:
        z = self.y * (self.X @ theta)
        return float(np.mean(np.logaddexp(0.0, -z)) + 0.5 * self.l2 * theta @ theta)

    def losses(self, thetas: np.ndarray) -> np.ndarray:
        z = self.y[:, None] * (self.X @ thetas.T)
        return np.mean(np.logaddexp(0.0, -z), axis=0) + 0.5 * self.l2 * np.einsum("ij,ij->i", thetas, thetas)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_QUADRATIC_DEFAULTS = {
    "kind": "quadratic", "dim": 10, "mu": 1.0, "L": 10.0, "sigma2": 0.0,
    "rotation_seed": 0, "optimum_seed": 0,
}
_LOGISTIC_DEFAULTS = {
    "kind": "logistic", "n_samples": 2000, "dim": 10, "l2": 0.01, "batch_size": 32,
    "data_seed": 0, "label_noise": 0.1,
}


def objective_defaults(cfg: dict) -> dict:
    """Return ``cfg`` with every default written out explicitly."""
    kind = cfg.get("kind", "quadratic")
    if kind == "quadratic":
        base = dict(_QUADRATIC_DEFAULTS)
        if cfg.get("eigenvalues") is not None:
            for key in ("dim", "mu", "L"):
                base.pop(key)
    elif kind == "logistic":
        base = dict(_LOGISTIC_DEFAULTS)
    else:
        raise ValueError(f"unknown objective kind {kind!r}")
    base.update(cfg)
    unknown = set(base) - set(_QUADRATIC_DEFAULTS) - set(_LOGISTIC_DEFAULTS) - {"eigenvalues", "theta_star"}
    if unknown:
        raise ValueError(f"unknown objective keys: {', '.join(sorted(unknown))}")
    return base


def build_oracle(cfg: dict):
    """Construct an oracle from its configuration mapping."""
    kind = cfg.get("kind", "quadratic")
    if kind == "quadratic":
        if "eigenvalues" in cfg and cfg["eigenvalues"] is not None:
            eigs = np.asarray(cfg["eigenvalues"], dtype=np.float64)
            if cfg.get("theta_star") is not None:
                star = np.asarray(cfg["theta_star"], dtype=np.float64)
            elif cfg.get("optimum_seed") is not None:
                star = np.random.default_rng(cfg["optimum_seed"]).standard_normal(len(eigs))
            else:
                star = np.zeros(len(eigs))
            return QuadraticOracle(eigs, star, cfg.get("sigma2", 0.0), cfg.get("rotation_seed", 0))
        return QuadraticOracle.log_spaced(
            dim=cfg.get("dim", 10),
            mu=cfg.get("mu", 1.0),
            L=cfg.get("L", 10.0),
            sigma2=cfg.get("sigma2", 0.0),
            rotation_seed=cfg.get("rotation_seed", 0),
            optimum_seed=cfg.get("optimum_seed"),
        )
    if kind == "logistic":
        return LogisticOracle(
            n_samples=cfg.get("n_samples", 2000),
            dim=cfg.get("dim", 10),
            l2=cfg.get("l2", 0.01),
            batch_size=cfg.get("batch_size", 32),
            data_seed=cfg.get("data_seed", 0),
            label_noise=cfg.get("label_noise", 0.1),
        )
    raise ValueError(f"unknown objective kind {kind!r}")
