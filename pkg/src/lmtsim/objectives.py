"""Per-agent objectives: gradient oracles, data ingestion, and partitioning.

An oracle owns the local functions ``f_i`` of all agents and serves
values, exact gradients, and unbiased stochastic gradients.  Stochastic
minibatches are sampled with replacement inside each agent's shard, so
draws are i.i.d. across local steps; ``batch=None`` switches an oracle to
deterministic full-batch mode (zero gradient noise).
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class DatasetError(ValueError):
    """Raised for unusable datasets or malformed data files."""


@dataclass(frozen=True)
class Dataset:
    """Dense two-class dataset with labels already remapped to -1/+1."""

    features: np.ndarray  # (m, p)
    labels: np.ndarray    # (m,) valued in {-1.0, +1.0}

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PartitionedDataset:
    """Per-agent shards of a dataset; disjoint and jointly exhaustive."""

    shards: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def n_agents(self) -> int:
        return len(self.shards)

    @property
    def dim(self) -> int:
        return self.shards[0][0].shape[1]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(feat.shape[0] for feat, _ in self.shards)


def _remap_labels(raw: np.ndarray, origin: str) -> np.ndarray:
    """Map the two raw label values onto {-1, +1} by their sorted order."""
    values = np.unique(raw)
    if len(values) > 2:
        raise DatasetError(
            f"{origin}: {len(values)} distinct labels found, only two-class data supported")
    if len(values) < 2:
        # degenerate single-class file: map everything to +1
        return np.ones(raw.shape[0])
    return np.where(raw == values[0], -1.0, 1.0)


def load_libsvm(path: str) -> Dataset:
    """Read a LIBSVM text file into dense features.

    Each line is ``label index:value ...`` with 1-based feature indices;
    absent indices are zero.  Two distinct label values are required and
    are remapped to -1/+1 by sorted order.
    """
    labels: list[float] = []
    entries: list[list[tuple[int, float]]] = []
    max_index = 0
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
                row = []
                for tok in parts[1:]:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    if idx < 1:
                        raise ValueError(f"feature index {idx} < 1")
                    row.append((idx, float(val_str)))
                    max_index = max(max_index, idx)
                entries.append(row)
            except (ValueError, IndexError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed LIBSVM line ({exc})")
    if not entries:
        raise DatasetError(f"{path}: empty dataset file")
    features = np.zeros((len(entries), max(max_index, 1)))
    for i, row in enumerate(entries):
        for idx, val in row:
            features[i, idx - 1] = val
    return Dataset(features=features, labels=_remap_labels(np.array(labels), path))


def load_csv(path: str) -> Dataset:
    """Read a headerless CSV whose trailing column is the class label."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed CSV line ({exc})")
            if len(values) < 2:
                raise DatasetError(f"{path}:{lineno}: need at least one feature and a label")
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: empty dataset file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DatasetError(f"{path}: inconsistent column counts {sorted(widths)}")
    arr = np.array(rows)
    return Dataset(features=arr[:, :-1], labels=_remap_labels(arr[:, -1], path))


def make_synthetic_classification(samples: int, features: int, seed: int,
                                  separation: float = 2.0) -> Dataset:
    """Two Gaussian clouds on opposite sides of a random hyperplane.

    Feature rows are scaled to unit RMS norm so logistic smoothness
    constants stay O(1) regardless of dimension.
    """
    if samples < 2 or features < 1:
        raise DatasetError("need samples >= 2 and features >= 1")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=features)
    direction /= np.linalg.norm(direction)
    labels = np.where(np.arange(samples) % 2 == 0, 1.0, -1.0)
    X = rng.normal(size=(samples, features)) + 0.5 * separation * labels[:, None] * direction
    X /= np.sqrt(np.mean(np.sum(X * X, axis=1)))
    return Dataset(features=X, labels=labels)


def partition_heterogeneous(data: Dataset, n: int) -> PartitionedDataset:
    """Sort by label, then split into ``n`` contiguous shards.

    Shard sizes differ by at most one (earlier shards take the remainder).
    The stable sort keeps the original order within each class, so the
    split is deterministic.
    """
    m = data.n_samples
    if n < 1:
        raise DatasetError(f"need at least one agent, got {n}")
    if n > m:
        raise DatasetError(f"cannot split {m} samples among {n} agents")
    order = np.argsort(data.labels, kind="stable")
    feats = data.features[order]
    labs = data.labels[order]
    base, extra = divmod(m, n)
    shards = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        shards.append((feats[start:start + size].copy(), labs[start:start + size].copy()))
        start += size
    return PartitionedDataset(shards=tuple(shards))


class GradientOracle(abc.ABC):
    """Interface every objective family implements.

    Attributes:
        n_agents: number of local functions.
        dim: iterate dimension p.
        sigma: upper bound on the stochastic-gradient standard deviation
            (0 in deterministic mode).
        L: smoothness constant of the local functions, if known.
        mu: strong-convexity / PL modulus of the global function, if known.
        f_star: global minimum value, if known.
    """

    n_agents: int
    dim: int
    sigma: float
    L: float | None = None
    mu: float | None = None
    f_star: float | None = None

    @abc.abstractmethod
    def value(self, i: int, x: np.ndarray) -> float:
        """Local objective value f_i(x)."""

    @abc.abstractmethod
    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """Exact local gradient of f_i at x."""

    @abc.abstractmethod
    def stochastic_gradient(self, i: int, x: np.ndarray,
                            rng: np.random.Generator | None) -> np.ndarray:
        """Unbiased stochastic gradient of f_i at x (``rng`` may be None
        only in deterministic mode)."""

    def global_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.value(i, x) for i in range(self.n_agents)]))

    def global_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.full_gradients_at(x).mean(axis=0)

    def full_gradients_at(self, x: np.ndarray) -> np.ndarray:
        """All agents' exact gradients evaluated at the same point, (n, p)."""
        return np.stack([self.full_gradient(i, x) for i in range(self.n_agents)])

    def stochastic_gradient_matrix(self, X: np.ndarray, rng_for) -> np.ndarray:
        """Stacked stochastic gradients, agent i evaluated at row ``X[i]``.

        ``rng_for(i)`` must return the generator for agent i's draw;
        generators are consumed one agent at a time, in index order.
        """
        return np.stack([self.stochastic_gradient(i, X[i], rng_for(i))
                         for i in range(self.n_agents)])

    def values_at_rows(self, X: np.ndarray) -> np.ndarray:
        """Per-agent values f_i(X[i]), (n,)."""
        return np.array([self.value(i, X[i]) for i in range(self.n_agents)])

    def global_values_at_rows(self, X: np.ndarray) -> np.ndarray:
        """Global objective evaluated at each row of ``X``, (n,)."""
        return np.array([self.global_value(X[i]) for i in range(X.shape[0])])


class LogisticOracle(GradientOracle):
    """Binary logistic loss over per-agent shards with a configurable
    regularizer: ridge (``l2``) or a bounded nonconvex penalty.

    Data term of f_i: mean over the shard of log(1 + exp(-v u.x)).
    """

    def __init__(self, data: PartitionedDataset, reg: str, coeff: float,
                 batch: int | None):
        if coeff < 0:
            raise ValueError(f"regularizer coefficient must be >= 0, got {coeff}")
        if reg not in ("l2", "nonconvex"):
            raise ValueError(f"unknown regularizer {reg!r}")
        sizes = data.sizes
        if min(sizes) == 0:
            raise DatasetError("every agent needs a nonempty shard")
        if batch is not None:
            if batch < 1:
                raise ValueError(f"batch must be >= 1, got {batch}")
            if batch > min(sizes):
                raise ValueError(
                    f"batch {batch} exceeds smallest shard size {min(sizes)}")
        self.data = data
        self.reg = reg
        self.coeff = float(coeff)
        self.batch = batch
        self.n_agents = data.n_agents
        self.dim = data.dim

        self._features = np.concatenate([f for f, _ in data.shards])
        self._labels = np.concatenate([l for _, l in data.shards])
        self._offsets = np.concatenate([[0], np.cumsum(sizes)])
        self._sizes = np.array(sizes)

        sq = np.sum(self._features ** 2, axis=1)
        mean_sq = np.array([sq[self._offsets[i]:self._offsets[i + 1]].mean()
                            for i in range(self.n_agents)])
        self.L = float(mean_sq.max() / 4.0 + self.coeff)
        self.mu = self.coeff if reg == "l2" else None
        self.sigma = 0.0 if batch is None else float(np.sqrt(mean_sq.max() / batch))
        # per-sample weights of the global objective (shards are averaged
        # internally, agents are averaged with weight 1/n)
        self._global_weights = np.concatenate(
            [np.full(s, 1.0 / (self.n_agents * s)) for s in sizes])

    def _shard(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self._offsets[i], self._offsets[i + 1]
        return self._features[lo:hi], self._labels[lo:hi]

    def _reg_value(self, x: np.ndarray) -> float:
        if self.reg == "l2":
            return 0.5 * self.coeff * float(x @ x)
        xs = x * x
        return 0.5 * self.coeff * float(np.sum(xs / (1.0 + xs)))

    def _reg_gradient(self, x: np.ndarray) -> np.ndarray:
        if self.reg == "l2":
            return self.coeff * x
        return self.coeff * x / (1.0 + x * x) ** 2

    def value(self, i: int, x: np.ndarray) -> float:
        U, v = self._shard(i)
        margins = v * (U @ x)
        return float(np.mean(np.logaddexp(0.0, -margins))) + self._reg_value(x)

    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        U, v = self._shard(i)
        margins = v * (U @ x)
        slope = expit(-margins)          # = 1 / (1 + exp(margin))
        return -(U.T @ (v * slope)) / U.shape[0] + self._reg_gradient(x)

    def stochastic_gradient(self, i: int, x: np.ndarray,
                            rng: np.random.Generator | None) -> np.ndarray:
        if self.batch is None:
            return self.full_gradient(i, x)
        if rng is None:
            raise ValueError("minibatch oracle needs a random generator")
        U, v = self._shard(i)
        idx = rng.integers(0, U.shape[0], size=self.batch)
        Ub, vb = U[idx], v[idx]
        slope = expit(-(vb * (Ub @ x)))
        return -(Ub.T @ (vb * slope)) / self.batch + self._reg_gradient(x)

    def stochastic_gradient_matrix(self, X: np.ndarray, rng_for) -> np.ndarray:
        if self.batch is None:
            return np.stack([self.full_gradient(i, X[i]) for i in range(self.n_agents)])
        b = self.batch
        rows = np.empty((self.n_agents, b), dtype=np.int64)
        for i in range(self.n_agents):
            rows[i] = self._offsets[i] + rng_for(i).integers(0, self._sizes[i], size=b)
        U = self._features[rows.ravel()].reshape(self.n_agents, b, self.dim)
        v = self._labels[rows.ravel()].reshape(self.n_agents, b)
        margins = v * np.einsum("abp,ap->ab", U, X)
        slope = expit(-margins)
        data_grad = -np.einsum("ab,abp->ap", v * slope, U) / b
        if self.reg == "l2":
            return data_grad + self.coeff * X
        return data_grad + self.coeff * X / (1.0 + X * X) ** 2

    def global_values_at_rows(self, X: np.ndarray) -> np.ndarray:
        margins = self._labels[:, None] * (self._features @ X.T)  # (m, rows)
        losses = self._global_weights @ np.logaddexp(0.0, -margins)
        return losses + np.array([self._reg_value(x) for x in X])


def logistic_l2_oracle(data: PartitionedDataset, rho: float = 0.2,
                       batch: int | None = 1) -> LogisticOracle:
    """Logistic loss with ridge penalty ``rho/2 ||x||^2`` (strongly convex
    for rho > 0)."""
    return LogisticOracle(data, reg="l2", coeff=rho, batch=batch)


def logistic_nonconvex_oracle(data: PartitionedDataset, omega: float = 0.05,
                              batch: int | None = 1) -> LogisticOracle:
    """Logistic loss with the bounded nonconvex penalty
    ``omega/2 sum_q x_q^2 / (1 + x_q^2)``."""
    return LogisticOracle(data, reg="nonconvex", coeff=omega, batch=batch)


class QuadraticOracle(GradientOracle):
    """Heterogeneous quadratics ``f_i(x) = (x - b_i)' A_i (x - b_i) / 2``
    with optional isotropic Gaussian gradient noise.

    The minimizer and minimum of the global average are available in
    closed form, so the oracle exposes ``f_star`` exactly.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, sigma: float = 0.0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ValueError(f"need A of shape (n, p, p) and b of shape (n, p), "
                             f"got {A.shape} and {b.shape}")
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        self.A = A
        self.b = b
        self.n_agents, self.dim = b.shape
        self.sigma = float(sigma)
        self._hessian = A.mean(axis=0)
        eigvals = np.linalg.eigvalsh(self._hessian)
        self.mu = float(eigvals[0])
        self.L = float(max(np.linalg.eigvalsh(Ai)[-1] for Ai in A))
        rhs = np.einsum("ipq,iq->p", A, b) / self.n_agents
        self.x_star = np.linalg.solve(self._hessian, rhs)
        self.f_star = self._exact_global_value(self.x_star)
        self._noise_scale = self.sigma / np.sqrt(self.dim)

    def _exact_global_value(self, x: np.ndarray) -> float:
        d = x[None, :] - self.b
        return 0.5 * float(np.einsum("ip,ipq,iq->", d, self.A, d)) / self.n_agents

    def value(self, i: int, x: np.ndarray) -> float:
        d = x - self.b[i]
        return 0.5 * float(d @ self.A[i] @ d)

    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.A[i] @ (x - self.b[i])

    def stochastic_gradient(self, i: int, x: np.ndarray,
                            rng: np.random.Generator | None) -> np.ndarray:
        g = self.full_gradient(i, x)
        if self.sigma == 0.0:
            return g
        if rng is None:
            raise ValueError("noisy oracle needs a random generator")
        return g + rng.normal(0.0, self._noise_scale, size=self.dim)

    def full_gradients_at(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("ipq,q->ip", self.A, x) - np.einsum("ipq,iq->ip", self.A, self.b)

    def stochastic_gradient_matrix(self, X: np.ndarray, rng_for) -> np.ndarray:
        G = np.einsum("ipq,iq->ip", self.A, X - self.b)
        if self.sigma == 0.0:
            return G
        for i in range(self.n_agents):
            G[i] += rng_for(i).normal(0.0, self._noise_scale, size=self.dim)
        return G

    def values_at_rows(self, X: np.ndarray) -> np.ndarray:
        d = X - self.b
        return 0.5 * np.einsum("ip,ipq,iq->i", d, self.A, d)

    def global_values_at_rows(self, X: np.ndarray) -> np.ndarray:
        d = X[:, None, :] - self.b[None, :, :]      # (rows, n, p)
        return 0.5 * np.einsum("rip,ipq,riq->r", d, self.A, d) / self.n_agents

    def global_value(self, x: np.ndarray) -> float:
        return self._exact_global_value(x)


def quadratic_pl_oracle(n: int, p: int, mu_min: float, L: float, sigma: float,
                        rng_seed: int, center: bool = False) -> QuadraticOracle:
    """Random heterogeneous quadratic testbed.

    The global Hessian has eigenvalues spanning ``[mu_min, L]`` exactly, so
    the global objective is ``mu_min``-strongly convex (hence PL with
    modulus ``mu_min``).  Per-agent curvatures receive mean-zero
    perturbations small enough to keep every ``A_i`` positive definite;
    the shifts ``b_i`` are standard Gaussian.  With ``center=True`` the
    shifts are translated so the global minimizer is the origin, which is
    convenient for steady-state noise measurements.
    """
    if not 0 < mu_min <= L:
        raise ValueError(f"need 0 < mu_min <= L, got mu_min={mu_min}, L={L}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(rng_seed)
    basis, _ = np.linalg.qr(rng.normal(size=(p, p)))
    spectrum = np.linspace(mu_min, L, p) if p > 1 else np.array([mu_min])
    H = (basis * spectrum) @ basis.T
    H = 0.5 * (H + H.T)

    A = np.broadcast_to(H, (n, p, p)).copy()
    if n > 1:
        G = rng.normal(size=(n, p, p))
        G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        G -= G.mean(axis=0)
        norms = np.array([np.linalg.norm(Gi, ord=2) for Gi in G])
        scale = 0.45 * mu_min / max(norms.max(), 1e-300)
        A += scale * G
    b = rng.normal(size=(n, p))

    oracle = QuadraticOracle(A, b, sigma=sigma)
    if center:
        oracle = QuadraticOracle(A, b - oracle.x_star, sigma=sigma)
    return oracle
