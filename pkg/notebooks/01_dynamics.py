# %% [markdown]
# # EW dynamics on small games
#
# One trajectory per game, classified by the finite-sample verdict.

# %%
import numpy as np

from ewlab import EWConfig, MixedProfile, StoppingRule, fixture, simulate
from ewlab.analysis import L_statistic, classify_trajectory, levy_average

# %%
for name in ["exa1", "exa2", "coord3", "matching_pennies"]:
    g = fixture(name)
    traj = simulate(EWConfig.create(g, 0.1, seed=1), StoppingRule.absorption(1e-4, 10**5))
    v = classify_trajectory(g, traj)
    print(f"{name:18s} {traj.stop.format(g):28s} verdict={v.label(g)}")

# %% [markdown]
# The Levy average of a fixed action set vanishes along a run.

# %%
g = fixture("exa1")
traj = simulate(EWConfig.create(g, 0.1, seed=4), StoppingRule.fixed(20000))
s = levy_average(traj, [(0, 0)])
print(s[[99, 999, 9999, 19999]])

# %% [markdown]
# L_t along a run of exa3 started away from the uniform profile.

# %%
g = fixture("exa3")
p0 = MixedProfile((np.array([0.6, 0.2, 0.2]), np.array([0.6, 0.2, 0.2])))
traj = simulate(EWConfig(g, 0.1, p0, 0), StoppingRule.absorption(1e-4, 10**6, z_eps=1e-8))
L = [L_statistic(g, traj.profile(t)) for t in range(0, len(traj) + 1, max(1, len(traj) // 10))]
print(traj.stop.format(g))
print(np.round(L, 4))
