# %% [markdown]
# # From LWE to k-LWE with an adjugate kernel basis
#
# Given `k` short vectors `S` and an invertible `k x k` column block `T`, the
# adjugate of `T` yields an integer matrix `U` with `S U = 0` whose entries
# are at most `(2B)^k`.  Multiplying an LWE pair by `U` and adding wide
# noise produces a k-LWE challenge.

# %%
import numpy as np

from qmoney.klwe_red import (
    REAL, HybridConfig, ReductionParams, adjugate, bounded_rows, direct_generator,
    distribution_audit, hybrid_table, hybrid_table_markdown, lift_lwe_to_klwe,
    lifted_generator, lwe_challenge, mod_switch_params,
)

rng = np.random.default_rng(7)
print(adjugate([[2, 1], [1, 3]]))
S = np.array([[1, -1, 0, 2, 1, 0, 1, -2], [0, 2, 1, -1, 0, 1, 1, 1]])
params = ReductionParams(k=2, B=2, fN=16 * 36.0, sigma=1.0)
inst, rec = lift_lwe_to_klwe(lwe_challenge(2, 6, 10007, 1.0, REAL, rng), S, params, rng)
print("S U = 0:", rec.claim_SU_zero, " max|U| =", rec.max_U, "<= (2B)^k =", params.entry_bound)
print("instance invariants:", inst.check())

# %% [markdown]
# Lifted challenges look like directly sampled ones.

# %%
p = ReductionParams(2, 1, 4 * 64.0, 1.0)
dS = bounded_rows(10, 1)
rep = distribution_audit(lifted_generator(3, 8, 11, 1.0, p, dS, REAL),
                         direct_generator(3, 8, 11, 1.0, p, dS, REAL), None, 200, rng)
print(f"{rep.n_statistics} statistics, min p = {rep.min_p:.3f}, passed = {rep.passed}")

# %% [markdown]
# Parameter bookkeeping for the remaining hops down to worst-case lattice problems.

# %%
print("sigma' =", mod_switch_params(8, 64, 97, 97 ** 2, 3.0, 0.1, 1.0))
print(hybrid_table_markdown(hybrid_table(HybridConfig(4, 64, 5 ** 9, 5, 3.0, 40.0))))
