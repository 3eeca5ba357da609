# %% [markdown]
# # Basin of (T, L) in the 2x2 coordination game
#
# Monte Carlo grid against the fixed point of the one-step map.

# %%
import numpy as np

from ewlab import fixture
from ewlab.harness import ExperimentSpec, run_grid, solve_basin_fixed_point

# %%
xs = np.round(np.linspace(0, 1, 11), 12)
res = run_grid(ExperimentSpec.grid_2x2(fixture("exa1"), xs, xs, runs=500, master_seed=42))
mc = res.table((0, 0))
print(np.round(mc, 3))

# %%
a = float(np.expm1(0.1))
basin = solve_basin_fixed_point(a, a)
exact = basin.at(xs, xs)
print(basin.iterations, basin.residual)
print("max |MC - fixed point|", np.abs(mc - exact).max())

# %% [markdown]
# Larger learning rates move the interior values toward the published grid.

# %%
for eta in (0.1, 0.2, 0.3):
    a = float(np.expm1(eta))
    print(eta, np.round(solve_basin_fixed_point(a, a).at([0.5], [0.3, 0.4, 0.6]), 3))
