# %% [markdown]
# # Monte Carlo on large rings
#
# The compiled simulator samples a uniform zero in constant time and keeps
# the span up to date.  Batch means give standard errors.

# %%
from bak_sneppen.exact_solver import build_kernel, stationary
from bak_sneppen.mc_engine import estimate_nu, scan_critical

est = estimate_nu(10, 0.5, 2_000_000, seed=1)
print(f"MC {est.nu_hat:.5f} +- {est.stderr:.5f}, exact {stationary(build_kernel(10, 0.5)).nu:.5f}")

# %% [markdown]
# Above the transition the number of zeros stays bounded as the ring grows;
# below it a fixed fraction of sites stays unfit.

# %%
res = scan_critical([32, 64, 128], [0.25, 0.35, 0.45, 0.55], 1_000_000, seed=0)
for row in res.rows:
    print(f"n={row['n']:4d} p={row['p']:.2f} nu={row['nu_hat']:.4f} zeros={row['zero_mass']:.2f}")
print("slopes of log zeros vs log n:", {p: round(s, 3) for p, s in res.slopes.items()})
print("crossing estimate:", round(res.crossing, 4))
