# %% [markdown]
# # Rounding measurements and why clones are hard to tell apart
#
# A rounding measurement picks `b = A r + e`, rounds `<b, x>` to one of `t`
# cells and records the cell.  On a density matrix it multiplies each entry
# `rho[x, x']` by the probability that `x` and `x'` land in the same cell.
# Coarse rounding is, up to small error, a mixture of fine rounding and
# doing nothing; with `b = C r' + e` it also dephases kernel classes.

# %%
import numpy as np

from qmoney import collapse_meas as cm
from qmoney.lattice_money import SchemeParams, attack_project, ball_amplitude, mint, setup
from qmoney.lattice_money import distinguish_experiment, measure_vector
from qmoney.statekit import StateVector

rng = np.random.default_rng(6)
q, m = 257, 6
S = np.zeros((m, 1), dtype=int)
S[0, 0] = S[1, 0] = 1
inst = setup(SchemeParams(q, 1, m, 1), S, rng)
_, note = mint(inst, ball_amplitude(m, 4), rng)
rho = note.density()
noise = cm.NoiseModel(0.5)
for t in (2, 4):
    r = cm.lemma_m1_suite(rho, inst, noise, t, 3, "exact")
    print(f"t={t}: coarse vs mixture deviation {r.deviation:.1e}")
print("p_t for q=257, t=4:", cm.p_t_exact(257, 4))

# %% [markdown]
# The projected coset (what the attack clones) survives `b = A r + e`
# rounding almost exactly like the honest note, while a classical vector is
# exposed by `b = C r' + e` rounding.

# %%
_, coset = attack_project(note, inst, rng)
y = measure_vector(coset, rng)
width = q / (64 * 4)
print("M1 survival (note, clone):", distinguish_experiment(note, coset, inst, width, 4))
print("M2 survival (note, classical):",
      distinguish_experiment(note, StateVector([tuple(y)], [1.0]), inst, width, 4, channel="M2"))

# %% [markdown]
# The amplifier turns a distinguisher between a state and its dephased
# version into an LWE-style distinguisher.

# %%
w = cm.amplifier_weights(2.0, 6)
print("amplifier round weights:", np.round(w, 4))
