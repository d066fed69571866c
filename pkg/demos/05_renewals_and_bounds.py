# %% [markdown]
# # Renewals and moment bounds
#
# The potential can only change when the chosen site is in the end set or
# the span flips.  Between those renewal times it is constant, which gives
# geometric control of the waiting times.

# %%
from bak_sneppen.bound_lab import (SyntheticWalk, cesaro_bound_check,
                                   check_geometric_domination, moment_bound_constants,
                                   trace_renewals, verify_fmm_on_walk)
from bak_sneppen.model_core import PotentialParams

params = PotentialParams(0.34656)
trace = trace_renewals(128, 0.6, params, 2_000_000, seed=0)
print("renewals", trace.renewal_count, "constancy violations", trace.constancy_violations)
print("largest increment from a positive value", trace.max_upstep_positive)
rep = check_geometric_domination(trace)
for b in rep.gap_bins[:10]:
    print(f"M~{b['m']:2d}: mean gap {b['mean_gap']:.3f} (bound {b['bound']:.2f}, n={b['count']})")
print("renewal drift above 8:", trace.renewal_drift())

# %% [markdown]
# A reflected random walk with negative drift satisfies the same two
# conditions, so its long-run moments obey the generic bounds.

# %%
c = moment_bound_constants(C=8, b=1, epsilon=0.4)
walk = verify_fmm_on_walk(SyntheticWalk.reflected(0.3), c, 2_000_000, seed=0)
print(c.as_dict())
print(walk.as_dict())

# %% [markdown]
# The time-averaged potential does not grow with ``n`` above the threshold.

# %%
ces = cesaro_bound_check([64, 128, 256], 0.6, params, 1_000_000, seed=0)
for row in ces.rows:
    print(row)
print("growth ratio", ces.growth_ratio)
