# %% [markdown]
# # Exact stationary laws on small rings
#
# For ``n`` up to about 20 the chain on all ``2^n`` configurations can be
# solved directly.  The stationary fraction of fit sites is ``nu``.

# %%
import numpy as np

from bak_sneppen.exact_solver import build_kernel, mu_exact, stationary
from bak_sneppen.model_core import PotentialParams

ps = np.round(np.arange(0.1, 1.0, 0.1), 2)
print("p    " + " ".join(f"n={n:<6d}" for n in (3, 6, 9, 12)))
for p in ps:
    row = [stationary(build_kernel(n, p)).nu for n in (3, 6, 9, 12)]
    print(f"{p:.1f}  " + " ".join(f"{v:.6f}" for v in row))

# %% [markdown]
# The stationary mean of the potential needs the span, which depends on
# history through ties; the span-tracking chain gives it exactly.

# %%
for p in (0.4, 0.6, 0.8):
    print(p, mu_exact(build_kernel(10, p), PotentialParams(0.3)))
