# %% [markdown]
# # Exhaustive audit of the flip and interior properties
#
# Every configuration with a span of length at least 6, every admissible
# span and every move is enumerated.  Two properties are tested: a flip
# should shorten the span, and a move outside the end set should leave the
# potential unchanged.

# %%
from bak_sneppen.exact_solver import exhaustive_lemma_check
from bak_sneppen.model_core import PotentialParams

for n in range(7, 13):
    rep = exhaustive_lemma_check(n, PotentialParams(0.3))
    s = rep.summary()
    print(n, {k: s[k] for k in ("flips", "flip_violations", "interior_violations",
                                "interior_changes", "flip_diameter_increases")})

# %% [markdown]
# Moves outside the end set never change the potential, and flips never
# lengthen the span.  Flips that keep the length do occur, for example:

# %%
rep = exhaustive_lemma_check(12, PotentialParams(0.3), max_examples=400)
ex = next(e for e in rep.examples if not e.tie_before)
print(ex)
