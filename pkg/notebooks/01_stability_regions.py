# %% [markdown]
# # Stability regions for two unstable modes
#
# Channel: P = 1, noise variance 1, drop probability 0.7, so each successful
# reception shrinks the estimation error variance by delta = 0.5.
# We classify a grid of (ln|l1|, ln|l2|) pairs under the four criteria.

# %%
import numpy as np

from nclab import ChannelParams
from nclab import conditions as C

ch = ChannelParams(power=1.0, noise_var=1.0, drop_prob=0.7)
print("delta            ", ch.delta)
print("fixed TDMA bound ", C.tdma_threshold(ch))
print("pair-sum bound   ", C.pair_sum_threshold(ch))
print("diagonal bound   ", C.equal_magnitude_threshold(2, ch))

# %% [markdown]
# ### The sweep
#
# Cells are classified through the sorted pair, so the full grid is
# symmetric. `ordered()` keeps the half with ln|l1| >= ln|l2|.

# %%
rep = C.region_sweep(ch, ln_max=0.12, resolution=120)
cells = rep.ordered()
for name in ("tdma", "adaptive", "optimal2d", "necessary"):
    print(f"{name:10s} {sum(getattr(c, name) for c in cells):6d} of {len(cells)} cells")

# %% [markdown]
# ### Where adaptive TDMA falls short
#
# Off the diagonal and the axis, the adaptive scheme loses a sliver of the
# region that the optimal two-dimensional scheduler keeps.

# %%
gap = np.array([(c.ln_l1, c.ln_l2) for c in cells if c.optimal2d and not c.adaptive])
print(len(gap), "cells in the gap")
print("l2 range in the gap:", gap[:, 1].min(), "to", gap[:, 1].max())

# %% [markdown]
# ### Coarse text map
#
# `#` every criterion holds, `+` adaptive and optimal, `o` optimal only,
# `.` unstabilizable. Rows are ln|l1| descending.

# %%
coarse = C.region_sweep(ch, ln_max=0.12, resolution=25)
grid = {(c.ln_l1, c.ln_l2): c for c in coarse.grid}
axis = sorted({c.ln_l1 for c in coarse.grid})
for l1 in reversed(axis):
    row = ""
    for l2 in axis:
        if l2 > l1:
            break
        c = grid[(l1, l2)]
        row += "#" if c.tdma else "+" if c.adaptive else "o" if c.optimal2d else "."
    print(f"{l1:6.3f} {row}")

# %% [markdown]
# Write the CSV consumed by plotting tools (same as `nclab region`).

# %%
text = rep.to_csv()
print(text.splitlines()[0])
print(len(text.splitlines()) - 1, "rows")
