# %% [markdown]
# # Dynamics, spans and the potential
#
# A ring of bits evolves by picking a uniform zero and redrawing it and its
# two neighbours.  The span is the shortest arc covering all zeros; the
# potential is its length with small deductions at the ends.

# %%
from bak_sneppen.model_core import (PotentialParams, RingConfig, detect_flip, make_rng,
                                    potential, step, zero_span)

params = PotentialParams(0.3)
config = RingConfig.from_string("1111000101111111")
span = zero_span(config)
print(config, "span", (span.l, span.r), "D =", span.diameter, "M =", potential(config, span, params))
print("end set:", sorted(span.end_set))

# %% [markdown]
# Follow a short trajectory and mark the steps that hit the end set or flip
# the span.  The potential only moves on those steps.

# %%
rng = make_rng(7)
for t in range(25):
    new, outcome = step(config, 0.55, rng)
    new_span = zero_span(new, span)
    hit = span.in_end_set(outcome.chosen_index)
    flip = detect_flip(span, new_span)
    m0, m1 = potential(config, span, params), potential(new, new_span, params)
    tag = "renewal" if hit or flip else ""
    print(f"{t:3d} {new} i={outcome.chosen_index:2d} D={new_span.diameter:2d} "
          f"M {m0:5.2f} -> {m1:5.2f} {tag}")
    config, span = new, new_span
