# %% [markdown]
# # Three schedulers on the same erasure record
#
# Fixed TDMA ignores erasures, adaptive TDMA waits for a quota of successes,
# and the optimal two-dimensional scheduler balances the two modes' moments.

# %%
import numpy as np

from nclab import ChannelParams
from nclab.conditions import expected_round_factor, quota_search
from nclab.model import SystemSpec
from nclab.sched import AdaptiveTDMA, FixedTDMA, Optimal2D, owner_sequence
from nclab.sim import SchedulerConfig, scheduler_moment_mc

ch = ChannelParams(1.0, 1.0, 0.7)
gammas = (np.random.default_rng(3).random(40) >= ch.drop_prob).astype(int)
print("gamma   ", "".join(map(str, gammas)))
for label, s in [("fixed", FixedTDMA((1, 1))), ("adaptive", AdaptiveTDMA((2, 1))),
                 ("optimal", Optimal2D(2, 0.05, 0.03, ch))]:
    print(f"{label:8s}", "".join(str(o + 1) for o in owner_sequence(s, gammas)))

# %% [markdown]
# ### Quotas for adaptive TDMA
#
# Smallest total number of successes per round that makes every mode
# contract, ties broken lexicographically.

# %%
spec = SystemSpec.from_log_magnitudes([0.05, 0.03])
print("quotas:", quota_search(spec, ch))

# %% [markdown]
# ### Round moments
#
# Each entry is E[l_i^(2 T_round) delta^(successes_i)]; below 1 means the mode
# contracts round over round.

# %%
for cfg in (SchedulerConfig("fixed_tdma", (1, 1)), SchedulerConfig("adaptive_tdma", (2, 1)),
            SchedulerConfig("optimal2d", n1=10)):
    res = scheduler_moment_mc(cfg, [0.05, 0.03], ch, 50_000, seed=1)
    print(f"{cfg.kind:14s}", "  ".join(f"{m.mean:.4f}+-{m.std_error:.4f}"
                                      for m in res.round_moments))

# %% [markdown]
# Single adaptive phases against the negative-binomial closed form:

# %%
res = scheduler_moment_mc(SchedulerConfig("adaptive_tdma", (2, 1)), [0.05, 0.03], ch,
                          100_000, seed=2)
for m, ln, n in zip(res.phase_moments, (0.05, 0.03), (2, 1)):
    print(f"MC {m.mean:.5f}+-{m.std_error:.5f}   closed form {expected_round_factor(ln, n, ch):.5f}")
