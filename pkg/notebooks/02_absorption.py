# %% [markdown]
# # Probability of always playing a strict NE
#
# Certified enclosures of the infinite product against Monte Carlo.

# %%
import numpy as np

from ewlab import MixedProfile, fixture
from ewlab.analysis import AbsorptionQuery, always_L_probability, example18_chain, prob_always_play
from ewlab.analysis.products import direct_partial_product

# %%
g = fixture("exa1")
for eta in (0.1, 0.5, 1.0, 2.0):
    e = prob_always_play(AbsorptionQuery(g, (0, 0), MixedProfile.uniform(g), eta, 1e-12))
    print(f"eta={eta:<4} {e}")

# %% [markdown]
# Partial products decrease to the enclosure.

# %%
p0 = MixedProfile.uniform(g)
for T in (1, 5, 10, 20, 40):
    print(T, direct_partial_product(g, (0, 0), p0, 1.0, T))

# %% [markdown]
# exa18 counting chain: never playing R.

# %%
e = always_L_probability(0.5, 0.5, 1.0)
chain = example18_chain(0.5, 0.5, 1.0, 1.0, seed=0, horizon=200, runs=20000)
print(e, chain.never_R().mean())
