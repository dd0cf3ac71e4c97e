# %% [markdown]
# # A group action hidden behind random encodings
#
# The oracle world hides `Z_p` acting on encoded points.  Each hidden prefix
# gives one orbit; the mint post-selects onto the image of the encoding and
# measures the hashed serial.

# %%
import numpy as np

from qmoney.invariant import PathWord, compute_orbits, verify_approx, walk_spectrum
from qmoney.toy_actions import (
    as_walkable, build_oracle_world, oracle_mint, path_solves_dlog, postselect_probability,
)

world = build_oracle_world(6, 1, 2, 7, [1, 3], seed=8)
wi = as_walkable(world)
print("post-selection probability:", postselect_probability(world))
for o in compute_orbits(wi):
    sp = walk_spectrum(wi, o)
    print(f"orbit of size {len(o)}, serial {world.invariant(o.repr)}, lambda2 {sp.lambda2:+.3f}")

# %% [markdown]
# Honest notes verify with certainty.

# %%
note = oracle_mint(world, np.random.default_rng(0))
print("accept:", verify_approx(wi, note, 20).accept_prob)

# %% [markdown]
# Any path between two points of an orbit reveals their discrete-log offset.

# %%
e = world.image[0]
path = PathWord([0, 2, 2, 1])          # +1 +3 +3 -1
z = e
for i in path.steps:
    z = wi.sigma(i, z)
print("path reveals the offset:", path_solves_dlog(world, e, z, path))
