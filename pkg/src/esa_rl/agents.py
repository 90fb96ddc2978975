"""Online tabular agents: Q-EarlySettled-Advantage and UCB-Q with Hoeffding bonus.

Both agents expose the same surface used by the harness:

* ``act(h, s)`` -- greedy action, ties broken toward the lowest index;
* ``observe(t)`` -- the per-step update for a :class:`~esa_rl.mdp.Transition`;
* ``policy()`` -- a copy of the current greedy policy, shape ``(H, S)``;
* ``copy()`` -- an independent deep copy of every table.

Value tables at step ``H`` (past the horizon) are implicitly zero. The
settle flag ``u_ref`` is kept per ``(h, s)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import Transition
from .rates import bonus_log_term, eta

DEFAULT_CB = 2.0
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class Hyperparams:
    """Problem dimensions plus the bonus constant and failure probability.

    ``iota`` defaults to ``ln(S*A*T/delta)`` with ``T = K*H``; pass it
    explicitly only to pin the log term (unit tests do).
    """

    S: int
    A: int
    H: int
    K: int
    c_b: float = DEFAULT_CB
    delta: float = DEFAULT_DELTA
    iota: float = field(default=None)

    def __post_init__(self):
        for name in ("S", "A", "H", "K"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.c_b > 0:
            raise ValueError(f"c_b must be > 0, got {self.c_b}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.iota is None:
            object.__setattr__(self, "iota", bonus_log_term(self.S, self.A, self.T, self.delta))
        if not self.iota > 0:
            raise ValueError(f"iota must be > 0, got {self.iota}")

    @property
    def T(self) -> int:
        return self.K * self.H

    @classmethod
    def for_mdp(cls, mdp, K: int, **kw) -> "Hyperparams":
        return cls(S=mdp.S, A=mdp.A, H=mdp.H, K=K, **kw)


def hoeffding_bonus(n: int, hp: Hyperparams) -> float:
    return hp.c_b * math.sqrt(hp.H**3 * hp.iota / n)


class EsaAgent:
    """Tables of Q-EarlySettled-Advantage.

    Ten ``(H, S, A)`` tables and four ``(H, S)`` tables; nothing else scales
    with the problem size. The bonus difference is consumed in the same step
    that produces it, so it is passed along rather than stored.
    """

    SA_TABLES = ("Q", "Q_ucb", "Q_lcb", "Q_ref", "N", "mu_ref", "sigma_ref", "mu_adv", "sigma_adv", "B_ref")
    S_TABLES = ("V", "V_lcb", "V_ref", "u_ref")

    def __init__(self, hp: Hyperparams):
        self.hp = hp
        H, S, A = hp.H, hp.S, hp.A
        self.Q = np.full((H, S, A), float(H))
        self.Q_ucb = np.full((H, S, A), float(H))
        self.Q_ref = np.full((H, S, A), float(H))
        self.Q_lcb = np.zeros((H, S, A))
        self.N = np.zeros((H, S, A), dtype=np.int64)
        self.mu_ref = np.zeros((H, S, A))
        self.sigma_ref = np.zeros((H, S, A))
        self.mu_adv = np.zeros((H, S, A))
        self.sigma_adv = np.zeros((H, S, A))
        self.B_ref = np.zeros((H, S, A))
        self.V = np.full((H, S), float(H))
        self.V_ref = np.full((H, S), float(H))
        self.V_lcb = np.zeros((H, S))
        self.u_ref = np.ones((H, S), dtype=bool)

    def tables(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.SA_TABLES + self.S_TABLES}

    def copy(self) -> "EsaAgent":
        new = object.__new__(type(self))
        new.hp = self.hp
        for name, arr in self.tables().items():
            setattr(new, name, arr.copy())
        return new

    def act(self, h: int, s: int) -> int:
        return act(self, h, s)

    def observe(self, t: Transition) -> None:
        esa_step(self, t, self.hp)

    def policy(self) -> np.ndarray:
        return greedy_policy_snapshot(self)


def new_esa_agent(hp: Hyperparams) -> EsaAgent:
    return EsaAgent(hp)


def act(state, h: int, s: int) -> int:
    return int(np.argmax(state.Q[h, s]))


def greedy_policy_snapshot(state) -> np.ndarray:
    return np.argmax(state.Q, axis=-1)


def _next_value(table: np.ndarray, h: int, s_next: int) -> float:
    return float(table[h + 1, s_next]) if h + 1 < table.shape[0] else 0.0


def update_ucb_q(state, t: Transition, n: int, eta_n: float, hp: Hyperparams) -> float:
    h, s, a = t.h, t.s, t.a
    target = t.r + _next_value(state.V, h, t.s_next) + hoeffding_bonus(n, hp)
    q = (1.0 - eta_n) * float(state.Q_ucb[h, s, a]) + eta_n * target
    state.Q_ucb[h, s, a] = q
    return q


def update_lcb_q(state, t: Transition, n: int, eta_n: float, hp: Hyperparams) -> float:
    h, s, a = t.h, t.s, t.a
    target = t.r + _next_value(state.V_lcb, h, t.s_next) - hoeffding_bonus(n, hp)
    q = (1.0 - eta_n) * float(state.Q_lcb[h, s, a]) + eta_n * target
    state.Q_lcb[h, s, a] = q
    return q


def update_moments(state, t: Transition, n: int, eta_n: float) -> tuple[float, float, float, float]:
    """Running moments of the reference and of the advantage at the next state.

    The reference moments are plain averages (weight ``1/n``); the advantage
    moments use the learning rate so that they track the recent window.
    """
    idx = (t.h, t.s, t.a)
    v_ref = _next_value(state.V_ref, t.h, t.s_next)
    adv = _next_value(state.V, t.h, t.s_next) - v_ref
    w = 1.0 / n
    mu_ref = (1.0 - w) * float(state.mu_ref[idx]) + w * v_ref
    sigma_ref = (1.0 - w) * float(state.sigma_ref[idx]) + w * v_ref * v_ref
    mu_adv = (1.0 - eta_n) * float(state.mu_adv[idx]) + eta_n * adv
    sigma_adv = (1.0 - eta_n) * float(state.sigma_adv[idx]) + eta_n * adv * adv
    state.mu_ref[idx] = mu_ref
    state.sigma_ref[idx] = sigma_ref
    state.mu_adv[idx] = mu_adv
    state.sigma_adv[idx] = sigma_adv
    return mu_ref, sigma_ref, mu_adv, sigma_adv


def update_bonus(state, h: int, s: int, a: int, n: int, hp: Hyperparams) -> tuple[float, float]:
    idx = (h, s, a)
    mu_ref, mu_adv = float(state.mu_ref[idx]), float(state.mu_adv[idx])
    # rounding can push E[X^2] - E[X]^2 a hair below zero
    var_ref = max(float(state.sigma_ref[idx]) - mu_ref * mu_ref, 0.0)
    var_adv = max(float(state.sigma_adv[idx]) - mu_adv * mu_adv, 0.0)
    b_next = hp.c_b * math.sqrt(hp.iota / n) * (math.sqrt(var_ref) + math.sqrt(hp.H) * math.sqrt(var_adv))
    d = b_next - float(state.B_ref[idx])
    state.B_ref[idx] = b_next
    return d, b_next


def advantage_bonus(state, h: int, s: int, a: int, n: int, eta_n: float, hp: Hyperparams, delta_ref: float) -> float:
    return (
        float(state.B_ref[h, s, a])
        + (1.0 - eta_n) * delta_ref / eta_n
        + hp.c_b * hp.H**2 * hp.iota / n**0.75
    )


def update_ucb_q_advantage(state, t: Transition, n: int, eta_n: float, hp: Hyperparams, delta_ref: float) -> float:
    """Reference-advantage Q update.

    Moments and the bonus must already be refreshed for this visit;
    ``delta_ref`` is the bonus difference :func:`update_bonus` just returned.
    """
    h, s, a = t.h, t.s, t.a
    b = advantage_bonus(state, h, s, a, n, eta_n, hp, delta_ref)
    adv = _next_value(state.V, h, t.s_next) - _next_value(state.V_ref, h, t.s_next)
    target = t.r + adv + float(state.mu_ref[h, s, a]) + b
    q = (1.0 - eta_n) * float(state.Q_ref[h, s, a]) + eta_n * target
    state.Q_ref[h, s, a] = q
    return q


def esa_step(state: EsaAgent, t: Transition, hp: Hyperparams) -> EsaAgent:
    h, s, a = t.h, t.s, t.a
    state.N[h, s, a] += 1
    n = int(state.N[h, s, a])
    eta_n = eta(n, hp.H)

    q_ucb = update_ucb_q(state, t, n, eta_n, hp)
    update_lcb_q(state, t, n, eta_n, hp)
    update_moments(state, t, n, eta_n)
    d_ref, _ = update_bonus(state, h, s, a, n, hp)
    q_ref = update_ucb_q_advantage(state, t, n, eta_n, hp, d_ref)

    state.Q[h, s, a] = min(q_ref, q_ucb, float(state.Q[h, s, a]))
    v = float(state.Q[h, s].max())
    v_lcb = max(float(state.Q_lcb[h, s].max()), float(state.V_lcb[h, s]))
    state.V[h, s] = v
    state.V_lcb[h, s] = v_lcb

    if v - v_lcb > 1.0:
        state.V_ref[h, s] = v
        state.u_ref[h, s] = True
    elif state.u_ref[h, s]:
        state.V_ref[h, s] = v
        state.u_ref[h, s] = False
    return state


class UcbQAgent:
    """Q-learning with a Hoeffding bonus, keeping only Q, V and visit counts.

    With ``monotone=True`` (default) each update is min-combined with the
    previous entry so Q and V never increase. ``monotone=False`` keeps the
    raw convex-combination iterate and caps V at H instead.
    """

    SA_TABLES = ("Q", "N")
    S_TABLES = ("V",)

    def __init__(self, hp: Hyperparams, monotone: bool = True):
        self.hp = hp
        self.monotone = monotone
        H, S, A = hp.H, hp.S, hp.A
        self.Q = np.full((H, S, A), float(H))
        self.N = np.zeros((H, S, A), dtype=np.int64)
        self.V = np.full((H, S), float(H))

    def tables(self) -> dict[str, np.ndarray]:
        return {"Q": self.Q, "N": self.N, "V": self.V}

    def copy(self) -> "UcbQAgent":
        new = object.__new__(type(self))
        new.hp, new.monotone = self.hp, self.monotone
        for name, arr in self.tables().items():
            setattr(new, name, arr.copy())
        return new

    def act(self, h: int, s: int) -> int:
        return act(self, h, s)

    def observe(self, t: Transition) -> None:
        ucbq_step(self, t, self.hp)

    def policy(self) -> np.ndarray:
        return greedy_policy_snapshot(self)


def new_ucbq_agent(hp: Hyperparams, monotone: bool = True) -> UcbQAgent:
    return UcbQAgent(hp, monotone=monotone)


def ucbq_step(state: UcbQAgent, t: Transition, hp: Hyperparams) -> UcbQAgent:
    h, s, a = t.h, t.s, t.a
    state.N[h, s, a] += 1
    n = int(state.N[h, s, a])
    eta_n = eta(n, hp.H)
    old = float(state.Q[h, s, a])
    target = t.r + _next_value(state.V, h, t.s_next) + hoeffding_bonus(n, hp)
    q = (1.0 - eta_n) * old + eta_n * target
    if state.monotone:
        state.Q[h, s, a] = min(q, old)
        state.V[h, s] = float(state.Q[h, s].max())
    else:
        state.Q[h, s, a] = q
        state.V[h, s] = min(float(state.Q[h, s].max()), float(hp.H))
    return state


ALGORITHMS = {"esa": new_esa_agent, "ucb-q": new_ucbq_agent}


def make_agent(algo: str, hp: Hyperparams, **kw):
    try:
        factory = ALGORITHMS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}") from None
    return factory(hp, **kw)


def table_sizes(agent) -> dict[str, int]:
    """Entry count of every learner table, keyed by name."""
    return {name: arr.size for name, arr in agent.tables().items()}
