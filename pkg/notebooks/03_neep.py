# %% [markdown]
# # Nash equilibria with equalizing payoffs

# %%
from ewlab import fixture
from ewlab.game import enumerate_neep_2p, strict_nash_equilibria

# %%
for name in ["matching_pennies", "chicken", "ex1111", "exa18", "exa2"]:
    g = fixture(name)
    comps = enumerate_neep_2p(g)
    print(f"{name}: strict NE {[g.format_profile(a) for a in strict_nash_equilibria(g)]}")
    for c in comps:
        print("   ", c.kind, c.supports)
