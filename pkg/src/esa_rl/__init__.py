"""Tabular episodic Q-learning with early-settled reference-advantage updates."""
from .agents import EsaAgent, Hyperparams, UcbQAgent, esa_step, make_agent, new_esa_agent, new_ucbq_agent, ucbq_step
from .envs import GeneratorSpec, chain_mdp, needle_mdp, random_mdp
from .harness import InitStateSchedule, RegretRecord, check_invariants, fit_regret_exponent, run_experiment, sweep
from .mdp import (
    InvalidMDPError,
    TabularMDP,
    Transition,
    ValueTables,
    load_mdp,
    make_rng,
    optimal_values,
    policy_values,
    run_episode,
    sample_transition,
    save_mdp,
    validate_mdp,
)
from .rates import eta, eta_seq, eta_seq_row

__version__ = "0.1.0"
