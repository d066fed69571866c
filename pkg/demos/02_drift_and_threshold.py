# %% [markdown]
# # Drift of the potential and the threshold
#
# Near the left end of a long span there are four patterns for the two
# sites after the end.  For each pattern the expected change of the
# potential has a closed form; an exhaustive enumeration over the moves at
# the end reproduces it exactly.

# %%
from fractions import Fraction

from bak_sneppen.drift_analysis import (EndCase, drift_closed_form, drift_enumerate,
                                        optimize_refined, refined_worst_drift, solve_threshold,
                                        worst_drift, REFERENCE_REFINED_PARAMS)

p, beta = Fraction(1, 2), Fraction(3, 10)
for case in EndCase:
    print(case.label, drift_closed_form(case, p, beta), drift_enumerate(case, p, beta))

# %% [markdown]
# The threshold is the smallest ``p`` at which one weight makes all four
# drifts non-positive; there the two extreme cases vanish together.

# %%
sol = solve_threshold()
print(f"p = {sol.p_diamond:.10f}, beta = {sol.beta_diamond:.10f}")
print(worst_drift(sol.p_diamond, sol.beta_diamond).as_dict())
for p in (0.40, 0.45, 0.50, 0.60):
    print(p, round(worst_drift(p, sol.beta_diamond).worst, 5))

# %% [markdown]
# Three weights that look two sites deep lower the threshold further.  The
# best weights at each ``p`` come from a small linear programme.

# %%
print("reference weights at 0.4196:", refined_worst_drift(0.4196, REFERENCE_REFINED_PARAMS))
ref = optimize_refined()
print(f"optimised threshold {ref.p_threshold:.8f}, weights {ref.params.as_tuple()}")
