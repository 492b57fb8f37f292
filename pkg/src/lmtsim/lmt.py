"""Local momentum tracking: the round update, hyperparameters, and schedules.

One communication round consists of four phases:

1. every agent runs ``Q`` corrected stochastic-gradient steps locally;
2. the average of the local gradients is folded into a momentum buffer;
3. tracking variables and mean-zero corrections are refreshed through one
   accelerated gossip exchange, so each agent's search direction follows
   the network-wide momentum despite heterogeneous data;
4. iterates take an outer step along the tracking direction and mix with
   the accelerated consensus operator (current + memory iterate).

Exact identities maintained by the round (used heavily in tests): the
row-mean of the tracking variables equals the row-mean of the updated
momentum, the averaged iterate moves by exactly ``eta_hat`` times the
averaged tracking direction, and corrections stay mean-zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .topology import C0, MixingMatrix, lca_params
from .streams import TrialStreams, gradient_rng_factory


@dataclass(frozen=True)
class HyperParams:
    """Round hyperparameters.

    ``eta_a`` is the local step, ``eta_s`` the outer step, ``beta`` the
    momentum coefficient, ``eta_w`` the consensus-acceleration weight.
    The composite step ``eta_hat = eta_a * eta_s * Q`` governs the motion
    of the averaged iterate.
    """

    Q: int
    eta_a: float
    eta_s: float
    beta: float
    eta_w: float

    def __post_init__(self) -> None:
        if self.Q < 1:
            raise ValueError(f"Q must be >= 1, got {self.Q}")
        if self.eta_a <= 0 or self.eta_s <= 0:
            raise ValueError(f"step sizes must be positive, got "
                             f"eta_a={self.eta_a}, eta_s={self.eta_s}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not 0.0 <= self.eta_w < 1.0:
            raise ValueError(f"eta_w must lie in [0, 1), got {self.eta_w}")

    @property
    def eta_hat(self) -> float:
        return self.eta_a * self.eta_s * self.Q


@dataclass(frozen=True)
class LmtState:
    """Stacked per-agent state after ``t`` communication rounds."""

    X: np.ndarray        # current iterates, (n, p)
    X_l: np.ndarray      # memory iterates of the accelerated consensus
    Z: np.ndarray        # momentum buffers
    C: np.ndarray        # corrections c_t
    C_prev: np.ndarray   # corrections c_{t-1}
    t: int


@dataclass(frozen=True)
class RoundOutputs:
    """Intermediate quantities of one round, kept for diagnostics."""

    Y: np.ndarray             # tracking directions used by the outer step
    Y_l: np.ndarray           # their memory counterparts
    R: np.ndarray             # averaged local gradients (momentum input)
    G_sum_avg: np.ndarray     # directly accumulated mean of drawn gradients
    X_locals: np.ndarray | None = None  # (Q, n, p) local paths, optional


def init_state(X0: np.ndarray) -> LmtState:
    """Fresh state: memory iterate equals the initial iterate, momentum and
    both corrections are zero."""
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim != 2:
        raise ValueError(f"X0 must be (n, p), got shape {X0.shape}")
    if not np.all(np.isfinite(X0)):
        raise ValueError("X0 contains non-finite entries")
    zeros = np.zeros_like(X0)
    return LmtState(X=X0.copy(), X_l=X0.copy(), Z=zeros.copy(),
                    C=zeros.copy(), C_prev=zeros.copy(), t=0)


def local_update_phase(state: LmtState, oracle, hp: HyperParams,
                       streams: TrialStreams | None,
                       collect_locals: bool = False):
    """Run ``Q`` corrected stochastic-gradient steps for every agent.

    Returns ``(X_Q, R, G_sum_avg, X_locals)`` where ``R`` recovers the
    per-agent average of the drawn gradients from the net local movement,
    and ``G_sum_avg`` is the same average accumulated directly.
    """
    X_cur = state.X.copy()
    G_sum = np.zeros_like(X_cur)
    locals_ = np.empty((hp.Q, *X_cur.shape)) if collect_locals else None
    for step in range(hp.Q):
        G = oracle.stochastic_gradient_matrix(X_cur, gradient_rng_factory(streams, state.t, step))
        G_sum += G
        X_cur = X_cur - hp.eta_a * (G + state.C)
        if locals_ is not None:
            locals_[step] = X_cur
    R = (state.X - X_cur) / (hp.eta_a * hp.Q) - state.C
    return X_cur, R, G_sum / hp.Q, locals_


def momentum_update(Z: np.ndarray, R: np.ndarray, beta: float) -> np.ndarray:
    """Exponential averaging of the per-round gradient estimates."""
    return beta * Z + (1.0 - beta) * R


def tracking_and_correction(state: LmtState, Z_next: np.ndarray,
                            W: MixingMatrix, eta_w: float):
    """Refresh tracking directions and corrections through one exchange.

    Returns ``(Y, Y_l, C_next)`` with ``Y = Z_next + C``,
    ``Y_l = Z_next + C_prev`` and
    ``C_next = C - Y + (1 + eta_w) W Y - eta_w Y_l``.
    Corrections stay mean-zero because ``W`` is doubly stochastic.
    """
    Y = Z_next + state.C
    Y_l = Z_next + state.C_prev
    C_next = state.C - Y + (1.0 + eta_w) * (W.weights @ Y) - eta_w * Y_l
    return Y, Y_l, C_next


def accelerated_consensus(state: LmtState, Y: np.ndarray, hp: HyperParams,
                          W: MixingMatrix):
    """Outer step along ``Y`` followed by one accelerated mixing step.

    Equivalent to applying the augmented consensus operator to the stacked
    pair ``(X - eta_hat Y, X_l - eta_hat Y)``.  With ``eta_w = 0`` this is
    plain mixing of the stepped iterates.
    """
    D = state.X - hp.eta_hat * Y
    D_l = state.X_l - hp.eta_hat * Y
    X_next = (1.0 + hp.eta_w) * (W.weights @ D) - hp.eta_w * D_l
    return X_next, D


def lmt_round(state: LmtState, oracle, W: MixingMatrix, hp: HyperParams,
              streams: TrialStreams | None = None,
              collect_locals: bool = False) -> tuple[LmtState, RoundOutputs]:
    """One full communication round of local momentum tracking."""
    X_Q, R, G_avg, locals_ = local_update_phase(state, oracle, hp, streams,
                                                collect_locals)
    Z_next = momentum_update(state.Z, R, hp.beta)
    Y, Y_l, C_next = tracking_and_correction(state, Z_next, W, hp.eta_w)
    X_next, X_l_next = accelerated_consensus(state, Y, hp, W)
    new_state = LmtState(X=X_next, X_l=X_l_next, Z=Z_next,
                         C=C_next, C_prev=state.C, t=state.t + 1)
    return new_state, RoundOutputs(Y=Y, Y_l=Y_l, R=R, G_sum_avg=G_avg,
                                   X_locals=locals_)


def naive_local_momentum_round(state: LmtState, oracle, W: MixingMatrix,
                               hp: HyperParams,
                               streams: TrialStreams | None = None,
                               collect_locals: bool = False) -> tuple[LmtState, RoundOutputs]:
    """Negative control: refresh the momentum buffer at every local step.

    Each local step folds its gradient into the momentum immediately and
    descends along the momentum; the tracking variables then follow the
    round-average of the momentum buffers.  For ``Q = 1``, or for
    ``beta = 0`` at any ``Q``, this coincides with :func:`lmt_round`; for
    ``Q > 1`` with momentum it loses the variance damping of the
    aggregated update and settles at a higher noise floor.
    """
    X_cur = state.X.copy()
    Z_run = state.Z.copy()
    M_sum = np.zeros_like(X_cur)
    G_sum = np.zeros_like(X_cur)
    locals_ = np.empty((hp.Q, *X_cur.shape)) if collect_locals else None
    for step in range(hp.Q):
        G = oracle.stochastic_gradient_matrix(X_cur, gradient_rng_factory(streams, state.t, step))
        G_sum += G
        Z_run = hp.beta * Z_run + (1.0 - hp.beta) * G
        M_sum += Z_run
        X_cur = X_cur - hp.eta_a * (Z_run + state.C)
        if locals_ is not None:
            locals_[step] = X_cur
    M = M_sum / hp.Q
    Y = M + state.C
    Y_l = M + state.C_prev
    C_next = state.C - Y + (1.0 + hp.eta_w) * (W.weights @ Y) - hp.eta_w * Y_l
    X_next, X_l_next = accelerated_consensus(state, Y, hp, W)
    new_state = LmtState(X=X_next, X_l=X_l_next, Z=Z_run,
                         C=C_next, C_prev=state.C, t=state.t + 1)
    return new_state, RoundOutputs(Y=Y, Y_l=Y_l, R=M, G_sum_avg=G_sum / hp.Q,
                                   X_locals=locals_)


# ---------------------------------------------------------------------------
# step-size schedules

#: 1 + 63 * C0, a constant recurring in the schedules below
_C1 = 1.0 + 63.0 * C0


def theorem1_stepsizes(L: float, sigma: float, n: int, Q: int, T: int,
                       delta_f: float, beta: float, eta_w: float) -> HyperParams:
    """Horizon-aware schedule for the smooth nonconvex regime.

    ``eta_hat`` and ``eta_a`` follow the published closed forms; ``eta_s``
    is back-solved from ``eta_hat = eta_a * eta_s * Q``.  At ``sigma = 0``
    the back-solved ``eta_s`` equals its admissible cap
    ``(1 - beta) / sqrt(6 c0)`` exactly; for ``sigma > 0`` it exceeds the
    cap (the closed-form pair is not jointly consistent with the cap), in
    which case a warning is emitted and the published pair is kept.
    """
    if L <= 0 or delta_f <= 0:
        raise ValueError(f"need L > 0 and delta_f > 0, got L={L}, delta_f={delta_f}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n < 1 or Q < 1 or T < 1:
        raise ValueError(f"need n, Q, T >= 1, got n={n}, Q={Q}, T={T}")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")

    noise_hat = math.sqrt(3.0 * L * sigma * sigma * T / (8.0 * n * Q * delta_f))
    eta_hat = 1.0 / (noise_hat + 30.0 * math.sqrt(3.0 * C0 * _C1) * L / (1.0 - beta))
    noise_a = math.sqrt(3.0 * Q * L * sigma * sigma * T / (8.0 * delta_f))
    eta_a = 1.0 / (noise_a + 15.0 * math.sqrt(2.0 * _C1) * Q * L)
    eta_s = eta_hat / (eta_a * Q)
    cap = (1.0 - beta) / math.sqrt(6.0 * C0)
    if eta_s > cap * (1.0 + 1e-9):
        warnings.warn(
            f"back-solved eta_s={eta_s:.4e} exceeds admissible cap {cap:.4e}; "
            "keeping the closed-form pair", stacklevel=2)
    return HyperParams(Q=Q, eta_a=eta_a, eta_s=eta_s, beta=beta, eta_w=eta_w)


def theorem2_stepsizes(mu: float, Q: int, T: int, lam: float) -> HyperParams:
    """Horizon-aware schedule for the PL regime.

    ``eta_a = 1/(Q mu T)``, ``eta_s = (1 - rho_w)/sqrt(15 c0)``, momentum
    pinned to the consensus contraction rate ``rho_w``.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if Q < 1 or T < 1:
        raise ValueError(f"need Q, T >= 1, got Q={Q}, T={T}")
    lca = lca_params(lam)
    eta_a = 1.0 / (Q * mu * T)
    eta_s = (1.0 - lca.rho_w) / math.sqrt(15.0 * C0)
    return HyperParams(Q=Q, eta_a=eta_a, eta_s=eta_s, beta=lca.rho_w,
                       eta_w=lca.eta_w)


def q_star(lam: float, sigma: float, n: int, epsilon: float) -> int:
    """Smallest number of local steps that saturates the communication
    budget: ``ceil(sqrt(1 - lam) sigma^2 / (n epsilon^2))``, at least 1."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lam must lie in [0, 1), got {lam}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    raw = math.sqrt(1.0 - lam) * sigma * sigma / (n * epsilon * epsilon)
    return max(1, math.ceil(raw))


def check_momentum(beta: float, rho_w: float) -> None:
    """Warn when the momentum coefficient is below the consensus rate;
    the convergence guarantees assume ``beta >= rho_w``."""
    if beta < rho_w - 1e-12:
        warnings.warn(f"momentum beta={beta:.4f} is below the consensus "
                      f"contraction rate rho_w={rho_w:.4f}", stacklevel=2)
