# %% [markdown]
# # The exponential tilt behind the optimal scheduler
#
# For the two-mode system (0.05, 0.03) the optimal scheduler's phase 2 is
# analysed with Y_t = exp(theta S_t + b t), where S_t counts successes. We
# solve for theta, check that Y is a martingale, and check that the stopped
# mean is 1.

# %%
import numpy as np

from nclab import ChannelParams
from nclab import conditions as C
from nclab.sim import martingale_probe

ch = ChannelParams(1.0, 1.0, 0.7)
sol = C.solve_theta(0.05, 0.03, ch)
print(f"theta = {sol.theta:.9f}  phi = {sol.phi:.9f}  b = {sol.drift:.9f}")
print(f"residual = {sol.residual:.2e}")

# %% [markdown]
# The function is decreasing on the bracket, so bisection finds the unique
# sign change.

# %%
f = C.theta_function(0.05, 0.03, ch)
for th in np.linspace(0.5 * np.log(ch.delta), 0.0, 7):
    print(f"{th:+.4f}  {f(th):+.6f}")

# %% [markdown]
# ### Phase-1 length
#
# The smallest n1 making both round moments contract.

# %%
n1 = C.min_n1_for_contraction(sol, 0.05, ch)
print("n1 =", n1, " critical phase-1 length =", -n1 / sol.phi)

# %% [markdown]
# ### Monte Carlo check of the optional-stopping identity

# %%
res = martingale_probe(sol, ch, samples=200_000, seed=0, episodes=50_000)
print("one step :", res.one_step)
print("stopped  :", res.stopped)

# %% [markdown]
# Past the pair-sum bound there is no root:

# %%
try:
    C.solve_theta(0.06, 0.035, ch)
except C.NoRoot as exc:
    print("NoRoot:", exc)
