"""Chance that every neighbor in a round list is a true neighbor.

Carrying last round's neighbors into the next candidate pool lets the
all-true probability climb towards one; picking from fresh candidates
only keeps it flat.
"""
import numpy as np

from panm.theory import (
    TABLE_III_SETTINGS,
    BallSelectionSetting,
    monte_carlo_selection_oracle,
    nsmc_dedup_prob_series,
    nsmc_prob_series,
    pens_prob_series,
)

# %% the reference grid, owner counted among the a white balls
print(" n   a   l   k | fresh-only |  carry-over t=1..7")
for n, a, l, k in TABLE_III_SETTINGS:
    s = BallSelectionSetting(n, a, l, k, include_self=True)
    nsmc = nsmc_prob_series(7, s)
    pens = pens_prob_series(7, s)
    print(f"{n:3d} {a:3d} {l:3d} {k:3d} |   {100 * pens[0]:6.2f}   | " + " ".join(f"{100 * p:6.2f}" for p in nsmc))

# %% simulate the urn to check one row
s = BallSelectionSetting(200, 50, 10, 5, include_self=True)
mc = monte_carlo_selection_oracle(s, 7, trials=100_000, seed=0)
print("\nmonte-carlo   ", np.round(100 * mc, 2))
print("analytic      ", np.round(100 * nsmc_prob_series(7, s), 2))

# %% the urn a client actually draws from: n-1 peers, a-1 of them true
s = BallSelectionSetting(40, 20, 10, 5)
print("\nn=40 a=20 l=10 k=5, peers urn")
print("ball model    ", np.round(nsmc_prob_series(5, s), 5))
# a peer drawn again while already held is one slot, not two; this chain
# tracks the pooled set exactly and is what the simulator realises
print("dedup chain   ", np.round(nsmc_dedup_prob_series(5, s), 5))
