"""Finite-horizon tabular MDPs, exact dynamic-programming solvers and sampling.

All indices are 0-based: steps ``h`` run over ``0..H-1``, states over
``0..S-1`` and actions over ``0..A-1``. The value at step ``H`` (one past the
last step) is identically zero.
"""
from __future__ import annotations

import bisect
import json
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

ROW_TOL = 1e-9


class InvalidMDPError(ValueError):
    """Raised when an MDP (or a policy over it) fails validation."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        shown = "; ".join(self.problems[:5])
        more = f" (+{len(self.problems) - 5} more)" if len(self.problems) > 5 else ""
        super().__init__(f"invalid MDP: {shown}{more}")


class Transition(NamedTuple):
    h: int
    s: int
    a: int
    r: float
    s_next: int


class ValueTables(NamedTuple):
    """Q with shape (H, S, A) and V with shape (H, S)."""

    Q: np.ndarray
    V: np.ndarray


class TabularMDP:
    """Episodic MDP with step-indexed kernels ``P[h, s, a, s']`` and rewards ``r[h, s, a]``.

    The object is treated as immutable once built. Nothing is validated at
    construction so that malformed instances can still be inspected with
    :func:`validate_mdp`; the solvers and the sampler validate on use.
    """

    def __init__(self, P, r):
        self.P = np.array(P, dtype=float)
        self.r = np.array(r, dtype=float)
        self.P.setflags(write=False)
        self.r.setflags(write=False)

    @property
    def H(self) -> int:
        return self.r.shape[0]

    @property
    def S(self) -> int:
        return self.r.shape[1]

    @property
    def A(self) -> int:
        return self.r.shape[2]

    def __repr__(self) -> str:
        return f"TabularMDP(S={self.S}, A={self.A}, H={self.H})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TabularMDP):
            return NotImplemented
        return np.array_equal(self.P, other.P) and np.array_equal(self.r, other.r)

    __hash__ = None

    @cached_property
    def cdf(self) -> np.ndarray:
        """Cumulative transition rows after renormalisation; the last column is exactly 1."""
        ensure_valid(self)
        P = self.P / self.P.sum(axis=-1, keepdims=True)
        c = np.cumsum(P, axis=-1)
        c[..., -1] = 1.0
        return c

    @cached_property
    def _cdf_lists(self) -> list:
        return self.cdf.tolist()

    @cached_property
    def _reward_lists(self) -> list:
        return self.r.tolist()

    def to_dict(self) -> dict:
        return {"S": self.S, "A": self.A, "H": self.H, "P": self.P.tolist(), "r": self.r.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TabularMDP":
        try:
            mdp = cls(d["P"], d["r"])
            dims = (int(d["S"]), int(d["A"]), int(d["H"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMDPError([f"malformed MDP document: {exc}"]) from exc
        if mdp.P.ndim != 4 or mdp.r.ndim != 3:
            raise InvalidMDPError([f"P must be [H][S][A][S] and r [H][S][A], got shapes {mdp.P.shape} and {mdp.r.shape}"])
        if dims != (mdp.S, mdp.A, mdp.H):
            raise InvalidMDPError([f"declared (S, A, H)={dims} does not match array shapes {(mdp.S, mdp.A, mdp.H)}"])
        return mdp


def validate_mdp(mdp: TabularMDP) -> list[str]:
    """Return a list of human-readable problems; empty iff ``mdp`` is valid."""
    P, r = mdp.P, mdp.r
    if r.ndim != 3:
        return [f"reward table must have 3 axes [H][S][A], got shape {r.shape}"]
    H, S, A = r.shape
    problems = []
    if min(H, S, A) < 1:
        problems.append(f"dimensions must be >= 1, got S={S}, A={A}, H={H}")
        return problems
    if P.shape != (H, S, A, S):
        problems.append(f"transition kernel shape {P.shape} != (H, S, A, S) = {(H, S, A, S)}")
        return problems
    for h, s, a in zip(*np.nonzero(~np.isfinite(r) | (r < 0) | (r > 1))):
        problems.append(f"reward {r[h, s, a]!r} out of [0,1] at (h={h},s={s},a={a})")
    for h, s, a in zip(*np.nonzero(~np.isfinite(P).all(axis=-1) | (P < 0).any(axis=-1))):
        problems.append(f"negative or non-finite probability at (h={h},s={s},a={a})")
    sums = P.sum(axis=-1)
    for h, s, a in zip(*np.nonzero(~(np.abs(sums - 1.0) <= ROW_TOL))):
        problems.append(f"row sum {sums[h, s, a]:.12g} != 1 +- {ROW_TOL:g} at (h={h},s={s},a={a})")
    return problems


def ensure_valid(mdp: TabularMDP) -> None:
    problems = validate_mdp(mdp)
    if problems:
        raise InvalidMDPError(problems)


def optimal_values(mdp: TabularMDP) -> ValueTables:
    """Backward induction for Q* and V*."""
    ensure_valid(mdp)
    H, S, A = mdp.H, mdp.S, mdp.A
    Q = np.zeros((H, S, A))
    V = np.zeros((H, S))
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.r[h] + mdp.P[h] @ v_next
        V[h] = Q[h].max(axis=1)
        v_next = V[h]
    return ValueTables(Q, V)


def greedy_policy(Q: np.ndarray) -> np.ndarray:
    """Argmax over actions; ``np.argmax`` already breaks ties toward the lowest index."""
    return np.argmax(Q, axis=-1)


def check_policy(mdp: TabularMDP, policy) -> np.ndarray:
    pi = np.asarray(policy)
    if pi.shape != (mdp.H, mdp.S):
        raise InvalidMDPError([f"policy shape {pi.shape} != (H, S) = {(mdp.H, mdp.S)}"])
    if not np.issubdtype(pi.dtype, np.integer):
        raise InvalidMDPError([f"policy entries must be integers, got dtype {pi.dtype}"])
    bad = np.argwhere((pi < 0) | (pi >= mdp.A))
    if len(bad):
        msgs = [f"action {pi[h, s]} out of range [0,{mdp.A}) at (h={h},s={s})" for h, s in bad]
        raise InvalidMDPError(msgs)
    return pi


def policy_values(mdp: TabularMDP, policy) -> ValueTables:
    """Exact evaluation of a deterministic policy ``policy[h, s] -> a``."""
    ensure_valid(mdp)
    pi = check_policy(mdp, policy)
    return _policy_values(mdp, pi)


def _policy_values(mdp: TabularMDP, pi: np.ndarray) -> ValueTables:
    H, S = mdp.H, mdp.S
    Q = np.empty((H, S, mdp.A))
    V = np.empty((H, S))
    states = np.arange(S)
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.r[h] + mdp.P[h] @ v_next
        V[h] = Q[h, states, pi[h]]
        v_next = V[h]
    return ValueTables(Q, V)


def policy_value_at(mdp: TabularMDP, pi: np.ndarray, s1: int) -> float:
    """V^pi at step 0 for a single start state, skipping the full Q table."""
    states = np.arange(mdp.S)
    v = np.zeros(mdp.S)
    for h in range(mdp.H - 1, -1, -1):
        a = pi[h]
        v = mdp.r[h, states, a] + mdp.P[h, states, a] @ v
    return float(v[s1])


def make_rng(seed: int) -> np.random.Generator:
    """The single PRNG used for a run: numpy's 64-bit PCG generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def inverse_cdf(cdf: Sequence[float], u: float) -> int:
    """Smallest index ``i`` with ``u < cdf[i]``."""
    i = bisect.bisect_right(cdf, u)
    return min(i, len(cdf) - 1)


def sample_transition(mdp: TabularMDP, h: int, s: int, a: int, rng: np.random.Generator) -> int:
    return inverse_cdf(mdp._cdf_lists[h][s][a], rng.random())


def run_episode(
    mdp: TabularMDP,
    act_fn: Callable[[int, int], int],
    observe_fn: Callable[[Transition], None] | None,
    s1: int,
    rng: np.random.Generator,
) -> list[Transition]:
    """Roll out one episode, handing each transition to ``observe_fn`` before the next step."""
    if not 0 <= s1 < mdp.S:
        raise ValueError(f"initial state {s1} out of range [0,{mdp.S})")
    cdf, rew = mdp._cdf_lists, mdp._reward_lists
    s = s1
    traj = []
    for h in range(mdp.H):
        a = act_fn(h, s)
        s_next = inverse_cdf(cdf[h][s][a], rng.random())
        t = Transition(h, s, a, rew[h][s][a], s_next)
        if observe_fn is not None:
            observe_fn(t)
        traj.append(t)
        s = s_next
    return traj


def load_mdp(path) -> TabularMDP:
    with open(path) as f:
        mdp = TabularMDP.from_dict(json.load(f))
    ensure_valid(mdp)
    return mdp


def save_mdp(mdp: TabularMDP, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()))
