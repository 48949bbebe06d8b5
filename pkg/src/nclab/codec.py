"""Per-coordinate encoder/decoder pair for transmitting ``x0[i]``.

The encoder first sends the scaled initial coordinate, then (after the
decoder has a first estimate) the scaled estimation error, which it knows
through the ideal feedback link. Each successful reception shrinks the
error variance by ``delta``; erased slots change nothing.

``estimate`` may be a numpy array, in which case one state replays many
independent trajectories that share the same erasure record.

Once the error standard deviation falls below double-precision resolution
of the prior (``error_var < prior_var * RESOLUTION``) the estimate is frozen
and the encoder sends 0: further updates would only add roundoff. The
variance law keeps running, floored at the smallest normal float so that
``error_var`` stays positive on long horizons.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from .model import ChannelParams, delta

RESOLUTION = sys.float_info.epsilon ** 2
_VAR_FLOOR = sys.float_info.min


@dataclass
class EstimatorState:
    coordinate_index: int
    prior_var: float
    estimate: float = 0.0
    error_var: float = float("nan")
    success_count: int = 0
    initialized: bool = False

    def __post_init__(self):
        if not self.prior_var > 0:
            raise ValueError("prior_var must be positive")
        if not self.initialized:
            self.error_var = self.prior_var

    @property
    def saturated(self) -> bool:
        """Estimate already exact to double precision."""
        return self.initialized and self.error_var < self.prior_var * RESOLUTION

    def copy(self) -> "EstimatorState":
        est = self.estimate.copy() if hasattr(self.estimate, "copy") else self.estimate
        return EstimatorState(self.coordinate_index, self.prior_var, est, self.error_var,
                              self.success_count, self.initialized)


def encode(st: EstimatorState, x0_i, ch: ChannelParams):
    """Channel input with ``E[s^2] = P`` under the modelled statistics."""
    if not st.initialized:
        return math.sqrt(ch.power / st.prior_var) * x0_i
    if st.saturated:
        return 0.0 * (st.estimate - x0_i)
    return math.sqrt(ch.power / st.error_var) * (st.estimate - x0_i)


def decode_update(st: EstimatorState, r, gamma: int, ch: ChannelParams) -> EstimatorState:
    """Fold one channel output into the estimate (in place; returns ``st``).

    An erased slot carries no information, so the state is left untouched.
    Until the first success the estimate stays at zero and the encoder keeps
    resending the initial-form symbol.
    """
    if not gamma:
        return st
    if not st.initialized:
        st.estimate = math.sqrt(st.prior_var / ch.power) * r
        st.error_var = st.prior_var * ch.noise_var / ch.power
        st.success_count = 1
        st.initialized = True
        return st
    if not st.saturated:
        # LMMSE gain E[r e] / E[r^2] for r = sqrt(P/var) e + n
        kappa = math.sqrt(ch.power * st.error_var) / (ch.power + ch.noise_var)
        st.estimate = st.estimate - kappa * r
    st.error_var = max(delta(ch) * st.error_var, _VAR_FLOOR)
    st.success_count += 1
    return st


def error_variance_after(prior_var: float, successes: int, ch: ChannelParams) -> float:
    """Error variance after ``successes`` receptions (``prior_var`` if none)."""
    if successes <= 0:
        return prior_var
    return max(prior_var * ch.noise_var / ch.power * delta(ch) ** (successes - 1), _VAR_FLOOR)
