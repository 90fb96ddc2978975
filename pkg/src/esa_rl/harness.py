"""Experiment driver: exact per-episode regret, invariant monitoring and sweeps."""
from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents import Hyperparams, make_agent
from .envs import GeneratorSpec
from .mdp import TabularMDP, ValueTables, ensure_valid, make_rng, optimal_values, run_episode

log = logging.getLogger(__name__)

CHECK_LEVELS = ("off", "cheap", "full")
STAT_TOL = 1e-9
DET_TOL = 1e-12
CLOSENESS_BOUND = 2.0

DETERMINISTIC = (
    "q_monotone",
    "v_monotone",
    "v_lcb_monotone",
    "q_ref_dominates",
    "jensen_ref",
    "jensen_adv",
    "settle_once",
    "q_range",
    "v_range",
    "v_lcb_range",
    "q_lcb_upper",
)
STATISTICAL = ("optimism", "pessimism_q", "pessimism_v", "closeness")


@dataclass(frozen=True)
class InitStateSchedule:
    """How the initial state of each episode is chosen: fixed, round-robin or seeded-random."""

    mode: str = "fixed"
    state: int = 0

    def __post_init__(self):
        if self.mode not in ("fixed", "round-robin", "seeded-random"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")

    def start(self, k: int, S: int, rng: np.random.Generator) -> int:
        if self.mode == "fixed":
            if not 0 <= self.state < S:
                raise ValueError(f"fixed initial state {self.state} out of range [0,{S})")
            return self.state
        if self.mode == "round-robin":
            return k % S
        return int(rng.integers(S))

    @classmethod
    def parse(cls, text: str) -> "InitStateSchedule":
        """``"fixed"``, ``"fixed:3"``, ``"round-robin"`` or ``"seeded-random"``."""
        mode, _, arg = text.partition(":")
        return cls(mode, int(arg)) if arg else cls(mode)

    def __str__(self) -> str:
        return f"fixed:{self.state}" if self.mode == "fixed" else self.mode


def check_invariants(
    snapshot,
    oracle: ValueTables | None,
    level: str = "full",
    previous=None,
    visited: Sequence[tuple[int, int, int]] | None = None,
    settle_counts: np.ndarray | None = None,
) -> Counter:
    """Count violating entries for each invariant.

    ``previous`` is the snapshot taken one episode earlier and enables the
    monotonicity checks. At ``level="cheap"`` only monotonicity and
    reference closeness are checked, and only at ``visited`` entries.
    ``settle_counts`` holds how often the settling branch already fired per
    ``(h, s)``; it is updated in place.
    """
    out = Counter()
    if level == "off":
        return out
    if level not in CHECK_LEVELS:
        raise ValueError(f"unknown check level {level!r}")
    tabs = snapshot.tables()
    prev = previous.tables() if previous is not None else None
    H = snapshot.hp.H

    if level == "cheap":
        if not visited:
            return out
        h, s, a = (np.asarray(x) for x in zip(*visited))
        sa, hs = (h, s, a), (h, s)
    else:
        sa = hs = (Ellipsis,)

    def count(name, mask):
        n = int(np.count_nonzero(mask))
        if n:
            out[name] += n

    if prev is not None:
        count("q_monotone", tabs["Q"][sa] > prev["Q"][sa] + DET_TOL)
        count("v_monotone", tabs["V"][hs] > prev["V"][hs] + DET_TOL)
        if "V_lcb" in tabs:
            count("v_lcb_monotone", tabs["V_lcb"][hs] < prev["V_lcb"][hs] - DET_TOL)
    if "V_ref" in tabs:
        count("closeness", np.abs(tabs["V"][hs] - tabs["V_ref"][hs]) > CLOSENESS_BOUND + STAT_TOL)
    if level == "cheap":
        return out

    Q, V = tabs["Q"], tabs["V"]
    count("q_range", (Q < -DET_TOL) | (Q > H + DET_TOL))
    count("v_range", (V < -DET_TOL) | (V > H + DET_TOL))
    if "Q_ref" in tabs:
        count("q_ref_dominates", Q > tabs["Q_ref"] + DET_TOL)
        count("jensen_ref", tabs["sigma_ref"] - tabs["mu_ref"] ** 2 < -STAT_TOL)
        count("jensen_adv", tabs["sigma_adv"] - tabs["mu_adv"] ** 2 < -STAT_TOL)
        count("q_lcb_upper", tabs["Q_lcb"] > H + DET_TOL)
        count("v_lcb_range", (tabs["V_lcb"] < -DET_TOL) | (tabs["V_lcb"] > H + DET_TOL))
        if prev is not None and settle_counts is not None:
            fired = prev["u_ref"] & ~tabs["u_ref"]
            count("settle_once", fired & (settle_counts >= 1))
            settle_counts += fired
    if oracle is not None:
        count("optimism", Q < oracle.Q - STAT_TOL)
        if "Q_lcb" in tabs:
            count("pessimism_q", tabs["Q_lcb"] > oracle.Q + STAT_TOL)
            count("pessimism_v", tabs["V_lcb"] > oracle.V + STAT_TOL)
    return out


def deterministic_failures(violations: dict) -> dict:
    return {k: v for k, v in violations.items() if k in DETERMINISTIC and v}


@dataclass(eq=False)
class RegretRecord:
    per_episode: np.ndarray
    cumulative: np.ndarray
    violations: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def K(self) -> int:
        return len(self.per_episode)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative[-1]) if self.K else 0.0

    def __eq__(self, other) -> bool:
        # wall time is excluded on purpose: it is the only non-replayable field
        if not isinstance(other, RegretRecord):
            return NotImplemented
        return (
            np.array_equal(self.per_episode, other.per_episode)
            and np.array_equal(self.cumulative, other.cumulative)
            and self.violations == other.violations
            and self.config == other.config
        )

    def clean(self, names: Sequence[str] = STATISTICAL) -> bool:
        return not any(self.violations.get(n, 0) for n in names)

    def csv_text(self) -> str:
        lines = ["episode,episode_regret,cum_regret"]
        lines += [f"{k},{r:.17g},{c:.17g}" for k, (r, c) in enumerate(zip(self.per_episode, self.cumulative))]
        return "\n".join(lines) + "\n"

    def summary(self, window_fraction: float = 0.5) -> dict:
        slope = None
        if self.K >= 100:
            try:
                slope = fit_regret_exponent(self, window_fraction)
            except ValueError:
                slope = None
        return {
            "config": self.config,
            "episodes": self.K,
            "final_cum_regret": self.final_regret,
            "slope": slope,
            "exact_optimal": bool(self.K and self.final_regret == 0.0),
            "violations": dict(sorted(self.violations.items())),
            "runtime_seconds": self.wall_time,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "regret.csv", out / "summary.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.summary(), indent=2) + "\n")
        return csv_path, json_path


def read_regret_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a regret CSV back into ``(per_episode, cumulative)``; raises ValueError on a bad header."""
    with open(path) as f:
        header = f.readline().strip()
        if header != "episode,episode_regret,cum_regret":
            raise ValueError(f"unexpected regret CSV header {header!r}")
        rows = [line.split(",") for line in f if line.strip()]
    for i, row in enumerate(rows):
        if len(row) != 3 or int(row[0]) != i:
            raise ValueError(f"malformed regret CSV row {i}: {row}")
    arr = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def _start_values(mdp: TabularMDP, pi: np.ndarray) -> np.ndarray:
    states = np.arange(mdp.S)
    v = np.zeros(mdp.S)
    for h in range(mdp.H - 1, -1, -1):
        a = pi[h]
        v = mdp.r[h, states, a] + mdp.P[h, states, a] @ v
    return v


def run_experiment(
    mdp: TabularMDP,
    algo: str,
    hp: Hyperparams,
    schedule: InitStateSchedule | None = None,
    seed: int = 0,
    check_level: str = "off",
    agent=None,
    config: dict | None = None,
    oracle: ValueTables | None = None,
    episodes: int | None = None,
) -> RegretRecord:
    """Run ``hp.K`` episodes and record the exact regret of each episode's greedy policy.

    ``agent`` overrides the freshly built learner (used to inject tables);
    ``episodes`` overrides the number of episodes actually run without
    touching the budget that sets the bonus log term.
    """
    ensure_valid(mdp)
    if (hp.S, hp.A, hp.H) != (mdp.S, mdp.A, mdp.H):
        raise ValueError(f"hyperparameters sized for (S,A,H)={(hp.S, hp.A, hp.H)} but MDP is {(mdp.S, mdp.A, mdp.H)}")
    if check_level not in CHECK_LEVELS:
        raise ValueError(f"unknown check level {check_level!r}")
    schedule = schedule or InitStateSchedule()
    agent = agent if agent is not None else make_agent(algo, hp)
    oracle = oracle if oracle is not None else optimal_values(mdp)
    v_star = oracle.V[0]
    rng = make_rng(seed)

    t0 = time.perf_counter()
    K = hp.K if episodes is None else episodes
    if K < 0:
        raise ValueError(f"episode count must be >= 0, got {K}")
    regret = np.empty(K)
    violations = Counter()
    settle_counts = np.zeros((hp.H, hp.S), dtype=np.int64)
    previous = agent.copy() if check_level != "off" else None
    cached_pi, cached_v = None, None
    visited = []
    observe = agent.observe
    if check_level == "cheap":
        def observe(t, _inner=agent.observe):
            visited.append((t.h, t.s, t.a))
            _inner(t)

    for k in range(K):
        s1 = schedule.start(k, mdp.S, rng)
        pi = agent.policy()
        if cached_pi is None or not np.array_equal(pi, cached_pi):
            cached_pi, cached_v = pi, _start_values(mdp, pi)
        regret[k] = v_star[s1] - cached_v[s1]
        visited.clear()
        run_episode(mdp, agent.act, observe, s1, rng)
        if check_level != "off":
            violations += check_invariants(
                agent, oracle if check_level == "full" else None, check_level, previous, visited, settle_counts
            )
            previous = agent.copy()

    echo = {
        "algorithm": algo,
        "hyperparams": {"K": hp.K, "c_b": hp.c_b, "delta": hp.delta, "iota": hp.iota},
        "seed": seed,
        "schedule": str(schedule),
        "check_level": check_level,
    }
    echo.update(config or {})
    return RegretRecord(regret, np.cumsum(regret), dict(violations), echo, time.perf_counter() - t0)


def fit_regret_exponent(record, window_fraction: float = 0.5) -> float | None:
    """Least-squares slope of log cumulative regret against log episode over the trailing window.

    Accepts a :class:`RegretRecord` or a cumulative-regret array. Returns
    ``None`` when regret is identically zero (the learner was exactly optimal
    throughout and no exponent is defined).
    """
    cum = np.asarray(record.cumulative if isinstance(record, RegretRecord) else record, dtype=float)
    K = len(cum)
    if K < 100:
        raise ValueError(f"need at least 100 episodes to fit an exponent, got {K}")
    if not 0 < window_fraction <= 1:
        raise ValueError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    if not np.any(cum):
        return None
    start = K - max(2, int(math.ceil(window_fraction * K)))
    k = np.arange(start + 1, K + 1, dtype=float)
    window = cum[start:]
    if np.any(window <= 0):
        raise ValueError("cumulative regret must be positive over the fitting window")
    slope, _ = np.polyfit(np.log(k), np.log(window), 1)
    return float(slope)


@dataclass
class SweepResult:
    mdp_index: int
    algo: str
    hp_overrides: dict
    seed: int
    record: RegretRecord | None = None
    error: str | None = None


def _sweep_cell(args) -> SweepResult:
    i, mdp, algo, overrides, seed, schedule, check_level = args
    res = SweepResult(i, algo, dict(overrides), seed)
    try:
        config = {}
        if isinstance(mdp, GeneratorSpec):
            config["env"] = mdp.to_dict()
            mdp = mdp.build()
        ensure_valid(mdp)
        hp = Hyperparams.for_mdp(mdp, **overrides)
        res.record = run_experiment(mdp, algo, hp, schedule, seed, check_level, config=config)
    except Exception as exc:  # isolate the cell; the sweep goes on
        log.warning("sweep cell (mdp=%d, algo=%s, seed=%d) failed: %s", i, algo, seed, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ESA_RL_THREADS", "1")))
    except ValueError:
        return 1


def sweep(
    mdps: Sequence[TabularMDP | GeneratorSpec],
    algos: Sequence[str],
    hp_grid: Sequence[dict],
    seeds: Sequence[int],
    schedule: InitStateSchedule | None = None,
    check_level: str = "off",
    workers: int | None = None,
) -> list[SweepResult]:
    """Cartesian product over (mdp, algo, hyperparameters, seed) in that nesting order.

    Each ``hp_grid`` entry holds keyword overrides for :class:`Hyperparams`
    and must include ``K``. Results come back in grid order whatever the
    worker count; failed cells carry ``error`` instead of ``record``.
    """
    if not (mdps and algos and hp_grid and seeds):
        raise ValueError("sweep grids must be nonempty")
    cells = [
        (i, mdp, algo, overrides, seed, schedule, check_level)
        for i, mdp in enumerate(mdps)
        for algo in algos
        for overrides in hp_grid
        for seed in seeds
    ]
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        return [_sweep_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_cell, cells))


def fraction_clean(records: Sequence[RegretRecord], names: Sequence[str] = STATISTICAL) -> float:
    """Share of records with zero violations of every invariant in ``names``."""
    if not records:
        return 0.0
    return sum(r.clean(names) for r in records) / len(records)
