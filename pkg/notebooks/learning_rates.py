"""
The rescaled learning rate
==========================

``eta_n = (H + 1) / (H + n)`` keeps the effective averaging window at
roughly the last 1/H fraction of visits. The weights ``eta_n^N`` that the
n-th sample carries after N visits have a handful of useful properties.
"""

# %%
import numpy as np

from esa_rl.rates import eta_seq_row, rate_properties, rate_suite, tail_sum

H, N = 5, 200
w = eta_seq_row(N, H)
print("sum of weights:", w.sum())
print("largest weight:", w.max(), "bound 2H/N:", 2 * H / N)
print("sum of squares:", (w**2).sum(), "bound 2H/N:", 2 * H / N)

# %%
# Weight mass sits on the most recent visits.
recent = w[-N // H:].sum()
print(f"mass on last {N // H} visits: {recent:.3f}")

# %%
print(rate_properties(N, H))
print("tail sum from n=1:", tail_sum(1, H, 5000), "bound:", 1 + 1 / H)

failures, n = rate_suite(N_max=300)
print(f"{n} checks, {len(failures)} failures")
print(np.round(eta_seq_row(3, 1), 4))
