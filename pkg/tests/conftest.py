import itertools

import numpy as np
import pytest

from esa_rl.mdp import TabularMDP

ACCEPTANCE_LINES = []


def forward_policy_value(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    """V^pi at step 0 for every start state by pushing state distributions forward.

    Independent of the backward-induction solvers: it never forms a value
    table, only occupancy measures.
    """
    H, S = mdp.H, mdp.S
    out = np.zeros(S)
    for s0 in range(S):
        d = np.zeros(S)
        d[s0] = 1.0
        total = 0.0
        for h in range(H):
            nxt = np.zeros(S)
            for s in range(S):
                if d[s] == 0.0:
                    continue
                a = pi[h, s]
                total += d[s] * mdp.r[h, s, a]
                nxt += d[s] * mdp.P[h, s, a]
            d = nxt
        out[s0] = total
    return out


def brute_force_optimal_start_values(mdp: TabularMDP) -> np.ndarray:
    best = np.full(mdp.S, -np.inf)
    for flat in itertools.product(range(mdp.A), repeat=mdp.H * mdp.S):
        pi = np.array(flat).reshape(mdp.H, mdp.S)
        best = np.maximum(best, forward_policy_value(mdp, pi))
    return best


def two_step_mdp() -> TabularMDP:
    """S=2, A=2, H=2: at step 0 in state 0, action 0 moves to state 1 for free,
    action 1 stays and pays 0.5; at step 1 state 1 pays 1 and state 0 pays 0."""
    P = np.zeros((2, 2, 2, 2))
    P[:, :, :, :] = 0.0
    P[0, 0, 0, 1] = 1.0
    P[0, 0, 1, 0] = 1.0
    P[0, 1, :, 1] = 1.0
    P[1, :, :, 0] = 1.0
    r = np.zeros((2, 2, 2))
    r[0, 0, 1] = 0.5
    r[1, 1, :] = 1.0
    return TabularMDP(P, r)


@pytest.fixture
def small_mdp():
    return two_step_mdp()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
