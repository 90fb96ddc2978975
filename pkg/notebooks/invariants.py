"""
Checking the learner's invariants
=================================

The harness can audit every snapshot of the agent tables against the
exact optimum: optimism of Q, pessimism of Q_lcb, monotone value tables,
and the reference settling at most once per (h, s).
"""

# %%
from esa_rl import Hyperparams, random_mdp, run_experiment
from esa_rl.harness import DETERMINISTIC, STATISTICAL, fraction_clean

mdp = random_mdp(4, 3, 4, seed=0)
rec = run_experiment(mdp, "esa", Hyperparams.for_mdp(mdp, K=5000), seed=0, check_level="full")
for name in DETERMINISTIC + STATISTICAL:
    print(f"{name:16s} {rec.violations.get(name, 0)}")

# %%
# The deterministic checks must hold on every run. The statistical ones hold
# with high probability, so count clean seeds instead.
records = []
for seed in range(10):
    m = random_mdp(3, 2, 3, seed=seed)
    records.append(run_experiment(m, "esa", Hyperparams.for_mdp(m, K=2000), seed=seed, check_level="full"))
print(f"clean seeds: {fraction_clean(records):.0%}")
