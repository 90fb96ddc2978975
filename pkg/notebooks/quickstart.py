"""
Quickstart: one learner on one MDP
==================================

Build a small random MDP, solve it exactly, run the early-settled
reference-advantage learner for a few thousand episodes and look at regret.
"""

# %%
# A random environment is fully described by its kernel ``P[h, s, a, s']``
# and reward table ``r[h, s, a]``. Indices are 0-based throughout.
import numpy as np

from esa_rl import EsaAgent, Hyperparams, optimal_values, random_mdp, run_experiment
from esa_rl.harness import fit_regret_exponent
from esa_rl.mdp import greedy_policy

mdp = random_mdp(S=4, A=3, H=4, seed=0)
print(mdp.P.shape, mdp.r.shape)

# %%
# The exact optimum comes from backward induction; it is the yardstick for
# regret.
Q_star, V_star = optimal_values(mdp)
print("V* at step 0:", np.round(V_star[0], 3))

# %%
# Hyperparameters: ``c_b`` scales every bonus, ``delta`` sets the confidence
# level, and the log term is derived from S, A, K, H and delta.
hp = Hyperparams.for_mdp(mdp, K=5000, c_b=0.4)
print(hp)

agent = EsaAgent(hp)
record = run_experiment(mdp, "esa", hp, seed=0, agent=agent)
print(f"final regret {record.final_regret:.1f}")
print(f"fitted exponent {fit_regret_exponent(record):.3f}")

# %%
# The greedy policy at the end of training, next to the optimal one. States
# the learner rarely reaches can still disagree.
print("learned:\n", agent.policy())
print("optimal:\n", greedy_policy(Q_star))
