# %% [markdown]
# # Supermartingale potentials
#
# Z on a strong coordination game and Z' on the 3x3 variant.

# %%
import numpy as np

from ewlab import EWConfig, EWState, MixedProfile, fixture
from ewlab.analysis import (
    calibrate_zprime_threshold,
    expected_next_potential,
    one_step_expected_potential,
    supermartingale_constants,
)

# %%
c = fixture("coord3")
print(supermartingale_constants(c, 0.1))
p = MixedProfile((np.array([0.05, 0.05, 0.9]), np.array([0.9, 0.05, 0.05])))
print(one_step_expected_potential(c, EWState.initial(EWConfig(c, 0.1, p))).summary())

# %% [markdown]
# Plain Z fails on exa7: far from the diagonal it grows in expectation.

# %%
e7 = fixture("exa7")
for eps in (1e-2, 1e-4, 1e-6):
    q = MixedProfile((np.array([eps, 0.0, 1 - eps]), np.array([eps, 1 - eps, 0.0])))
    Z = 1 / np.max(q[0] * q[1])
    print(eps, expected_next_potential(e7, q, 0.1) / Z)

# %%
print(calibrate_zprime_threshold(e7, 0.1, 5000))
