# %% [markdown]
# # Rebuilding a coset state inside an ellipsoid
#
# Given one vector `y` of a coset `y + L(S)`, the clone
# 1. restricts the ellipsoid to the affine line/plane through `y`,
# 2. prepares a wide Gaussian over the short sublattice and rejects down to
#    the uniform superposition over the points inside the ellipsoid,
# 3. rejects again to imprint the note's amplitudes.

# %%
import itertools

import numpy as np

from qmoney.lattice_money import (
    ExplicitAmplitude, GoodEllipsoid, SchemeParams, ellipsoid_clone_plan, setup,
    sublattice_claim_holds,
)

rng = np.random.default_rng(5)
inst = setup(SchemeParams(101, 1, 3, 1), np.array([[0], [1], [1]]), rng)
pts = [p for p in itertools.product(range(-3, 4), repeat=3) if sum(v * v for v in p) <= 9]
amp = ExplicitAmplitude(pts, [1.0 + 0.1 * (p[1] % 3) for p in pts])
good = GoodEllipsoid(np.eye(3) * 9.0, np.zeros(3), amp.eta)

plan = ellipsoid_clone_plan((0, 1, 0), inst, good, amp)
print("short sublattice basis:", plan.R.ravel().tolist())
print("every coset point in the ellipsoid is reached:", sublattice_claim_holds(plan, inst.S))
print(f"P[reach ellipsoid] = {plan.p_to_E:.4f}, P[imprint amplitudes] = {plan.p_to_alpha:.4f}")
for lab, a in zip(plan.state.basis, plan.state.amps):
    print(lab, round(abs(a), 4))

# %%
hits = sum(plan.attempt(rng) for _ in range(10_000))
print(f"sampled success rate {hits / 10_000:.4f} vs predicted {plan.success_prob:.4f}")
