"""Linearly rescaled learning rate ``(H+1)/(H+n)`` and its aggregated weights.

``eta_seq(n, N, H)`` is the weight the n-th visit carries after N visits
when the estimate is a chain of convex-combination updates with rates
``eta(1), eta(2), ...``. Agents only ever use :func:`eta`; the weight helpers
exist for testing and offline replay.
"""
from __future__ import annotations

import math

import numpy as np


def eta(n: int, H: int) -> float:
    if n < 1:
        raise ValueError(f"learning rate index must be >= 1, got {n}")
    return (H + 1) / (H + n)


def eta_seq(n: int, N: int, H: int) -> float:
    if n == 0:
        return 1.0 if N == 0 else 0.0
    if N < n:
        return 0.0
    w = eta(n, H)
    for i in range(n + 1, N + 1):
        w *= 1.0 - eta(i, H)
    return w


def eta_seq_row(N: int, H: int) -> np.ndarray:
    """``[eta_seq(n, N, H) for n in 1..N]`` in O(N) via suffix products."""
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    n = np.arange(1, N + 1, dtype=float)
    rates = (H + 1) / (H + n)
    # tail[n-1] = prod_{i=n+1..N} (1 - eta_i)
    tail = np.ones(N)
    if N > 1:
        tail[:-1] = np.cumprod((1.0 - rates[:0:-1]))[::-1]
    return rates * tail


def rate_properties(N: int, H: int, tol: float = 1e-9) -> dict[str, bool]:
    """Evaluate the finite-N learning-rate properties for one (N, H) pair.

    Keys name each property; values are True when it holds within ``tol``.
    The infinite tail sum is checked separately by :func:`tail_sum`.
    """
    w = eta_seq_row(N, H)
    n = np.arange(1, N + 1, dtype=float)
    out = {"sum_to_one": bool(abs(w.sum() - 1.0) <= tol)}
    for a in (0.5, 0.75, 1.0):
        s = float(np.sum(w / n**a))
        out[f"inverse_power_{a:g}"] = N**-a - tol <= s <= 2 * N**-a + tol
    out["max_weight"] = bool(w.max() <= 2 * H / N + tol)
    out["sum_squares"] = float(np.sum(w**2)) <= 2 * H / N + tol
    return out


def tail_sum(n: int, H: int, N_max: int) -> float:
    """Partial sum ``sum_{N=n}^{N_max} eta_seq(n, N, H)``."""
    if N_max < n:
        return 0.0
    total = 0.0
    w = eta(n, H)
    for i in range(n, N_max + 1):
        if i > n:
            w *= 1.0 - eta(i, H)
        total += w
    return total


def rate_suite(Hs=(1, 2, 5, 10), N_max: int = 1000, tail_ns=(1, 2, 10), tail_N_max: int = 5000, tol: float = 1e-9):
    """Run every learning-rate property over a grid and return ``(failures, n_checks)``.

    ``failures`` lists ``(property, H, N)`` triples; an empty list means the suite passed.
    """
    failures = []
    checks = 0
    for H in Hs:
        for N in range(1, N_max + 1):
            for name, ok in rate_properties(N, H, tol).items():
                checks += 1
                if not ok:
                    failures.append((name, H, N))
        for n in tail_ns:
            checks += 1
            if tail_sum(n, H, tail_N_max) > 1 + 1 / H + tol:
                failures.append(("tail_sum", H, n))
    return failures, checks


def bonus_log_term(S: int, A: int, T: int, delta: float) -> float:
    """``ln(S A T / delta)``, natural log."""
    return math.log(S * A * T / delta)
