"""Seeded generators for benchmark MDPs.

Every generator builds a stationary kernel and replicates it over the
horizon. ``perturb > 0`` mixes independent per-step noise into each copy,
which gives a genuinely step-dependent instance.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mdp import TabularMDP, make_rng

CHAIN_LEFT_REWARD = 0.05
CHAIN_GOAL_REWARD = 1.0


def _random_rows(rng: np.random.Generator, shape) -> np.ndarray:
    x = rng.random(shape)
    return x / x.sum(axis=-1, keepdims=True)


def _replicate(P: np.ndarray, r: np.ndarray, H: int, perturb: float, rng) -> TabularMDP:
    P = np.repeat(P[None], H, axis=0)
    r = np.repeat(r[None], H, axis=0)
    if perturb > 0:
        P = (1 - perturb) * P + perturb * _random_rows(rng, P.shape)
        r = np.clip(r + perturb * (rng.random(r.shape) - 0.5), 0.0, 1.0)
    return TabularMDP(P, r)


def random_mdp(S: int, A: int, H: int, seed: int, perturb: float = 0.0) -> TabularMDP:
    """Rows are normalised i.i.d. uniforms; rewards are uniform on [0, 1]."""
    _check_dims(S, A, H)
    rng = make_rng(seed)
    P = _random_rows(rng, (S, A, S))
    r = rng.random((S, A))
    return _replicate(P, r, H, perturb, rng)


def chain_mdp(S: int, H: int, slip: float, perturb: float = 0.0, seed: int = 0) -> TabularMDP:
    """RiverSwim-style chain with two actions.

    Action 0 moves one state left (staying put at state 0) and pays 0.05
    only when taken at state 0. Action 1 moves one state right with
    probability ``1 - slip``, otherwise stays, and pays 1 only when taken at
    state ``S - 1``.
    """
    if S < 2:
        raise ValueError(f"chain needs S >= 2, got {S}")
    if not 0.0 <= slip <= 0.5:
        raise ValueError(f"slip must lie in [0, 0.5], got {slip}")
    _check_dims(S, 2, H)
    P = np.zeros((S, 2, S))
    r = np.zeros((S, 2))
    for s in range(S):
        P[s, 0, max(s - 1, 0)] = 1.0
        right = min(s + 1, S - 1)
        P[s, 1, right] += 1.0 - slip
        P[s, 1, s] += slip
    r[0, 0] = CHAIN_LEFT_REWARD
    r[S - 1, 1] = CHAIN_GOAL_REWARD
    return _replicate(P, r, H, perturb, make_rng(seed))


def needle_mdp(S: int, A: int, H: int, gap: float, seed: int, perturb: float = 0.0) -> TabularMDP:
    """Reward 0.5 everywhere except one seeded ``(h, s, a)`` which pays ``0.5 + gap``."""
    if not 0.0 < gap <= 0.5:
        raise ValueError(f"gap must lie in (0, 0.5], got {gap}")
    _check_dims(S, A, H)
    rng = make_rng(seed)
    h0, s0, a0 = (int(rng.integers(n)) for n in (H, S, A))
    P = _random_rows(rng, (S, A, S))
    base = _replicate(P, np.full((S, A), 0.5), H, perturb, rng)
    r = np.full((H, S, A), 0.5)
    r[h0, s0, a0] += gap
    return TabularMDP(base.P, r)


def needle_location(mdp: TabularMDP) -> tuple[int, int, int]:
    idx = np.argwhere(mdp.r > 0.5)
    if len(idx) != 1:
        raise ValueError("not a needle MDP: expected exactly one elevated reward")
    return tuple(int(i) for i in idx[0])


def _check_dims(S, A, H):
    if min(S, A, H) < 1:
        raise ValueError(f"dimensions must be >= 1, got S={S}, A={A}, H={H}")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "random"
    S: int = 5
    A: int = 2
    H: int = 5
    seed: int = 0
    slip: float = 0.1
    gap: float = 0.5
    perturb: float = 0.0

    def build(self) -> TabularMDP:
        if self.kind == "random":
            return random_mdp(self.S, self.A, self.H, self.seed, self.perturb)
        if self.kind == "chain":
            return chain_mdp(self.S, self.H, self.slip, self.perturb, self.seed)
        if self.kind == "needle":
            return needle_mdp(self.S, self.A, self.H, self.gap, self.seed, self.perturb)
        raise ValueError(f"unknown generator kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.kind == "chain":
            d["A"] = 2
        return d
