# %% [markdown]
# # Cloning notes of the three-short-vector scheme
#
# A note is a superposition over short vectors `x` sharing the serial `A x`.
# Measuring the kernel class `C x` collapses it onto one coset of the short
# vectors, which any party can rebuild from a single measured vector.  Two
# clones of the same note then differ by a combination of the published
# short vectors -- never by anything new.

# %%
import numpy as np

from qmoney.lattice_money import KLSParams, kls_flaw_demo, kls_instance, mint

kp = KLSParams(P=4099, sigma=2, Delta=5, t=3, k=30, d=3)
inst, amp = kls_instance(kp, seed=1)
u, note = mint(inst, amp, np.random.default_rng(0))
print("instance q =", inst.q, " m =", inst.m, " note support size:", len(note.basis))

# %%
rep = kls_flaw_demo(kp, 5, np.random.default_rng(4), seed=1)
print("all differences decompose over {s0 - Delta s1, s1}:", rep.all_decompose)
print("trials producing a vector independent of S:", rep.n_independent)
print("clones passing the honest support check:", rep.support_pass_rate)
for t in rep.trials[:3]:
    print({k: t[k] for k in ("decomposes", "coefficients", "success_prob") if k in t})
