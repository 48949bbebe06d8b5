import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nclab.codec import EstimatorState, decode_update, encode, error_variance_after
from nclab.model import ChannelParams

UNIT = ChannelParams(1.0, 1.0, 0.3)


def test_encode_examples():
    assert encode(EstimatorState(0, 4.0), 2.0, UNIT) == 1.0
    st = EstimatorState(0, 1.0, estimate=0.7, error_var=1.0, success_count=1, initialized=True)
    assert encode(st, 0.7, UNIT) == 0.0
    assert encode(st, 1.2, UNIT) == pytest.approx(-0.5)


def test_erasure_leaves_state_unchanged():
    st = EstimatorState(1, 2.0, estimate=0.4, error_var=0.3, success_count=3, initialized=True)
    before = st.copy()
    decode_update(st, 9.9, 0, UNIT)
    assert st == before
    fresh = EstimatorState(0, 2.0)
    decode_update(fresh, 5.0, 0, UNIT)
    assert not fresh.initialized and fresh.estimate == 0.0 and fresh.error_var == 2.0


def test_first_success_and_lmmse_step():
    st = EstimatorState(0, 1.0)
    decode_update(st, 0.8, 1, UNIT)
    assert st.initialized and st.success_count == 1
    assert st.estimate == pytest.approx(0.8) and st.error_var == 1.0
    # kappa = sqrt(1*1)/(1+1) = 0.5
    decode_update(st, 0.2, 1, UNIT)
    assert st.estimate == pytest.approx(0.8 - 0.5 * 0.2)
    assert st.error_var == 0.5
    decode_update(st, 0.0, 1, UNIT)
    assert st.error_var == 0.25 and st.success_count == 3


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(1, 30))
def test_per_success_contraction_is_exact(prior, p, nv, k):
    ch = ChannelParams(p, nv, 0.5)
    s = EstimatorState(0, prior)
    decode_update(s, 1.0, 1, ch)
    v0 = s.error_var
    assert v0 == pytest.approx(prior * nv / p, rel=1e-15)
    for _ in range(k):
        decode_update(s, 0.3, 1, ch)
    assert s.error_var == pytest.approx(v0 * ch.delta ** k, rel=1e-12)
    assert s.error_var == pytest.approx(error_variance_after(prior, k + 1, ch), rel=1e-12)


@pytest.mark.parametrize("gammas", [
    [1, 0, 1, 1, 0, 0, 1],
    [0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
])
def test_unbiased_with_matching_variance(gammas):
    # replays share one erasure record; x0 and noise differ per replay
    m = 100_000
    ch = ChannelParams(2.0, 1.0, 0.5)
    prior = 3.0
    rng = np.random.default_rng(2024)
    x0 = rng.normal(0.0, math.sqrt(prior), m)
    st_ = EstimatorState(0, prior, estimate=np.zeros(m))
    for g in gammas:
        s = encode(st_, x0, ch)
        r = g * s + rng.standard_normal(m)
        decode_update(st_, r, g, ch)
    err = st_.estimate - x0
    assert abs(err.mean()) < 3 * err.std(ddof=1) / math.sqrt(m)
    var = st_.error_var
    assert var == pytest.approx(error_variance_after(prior, sum(gammas), ch), rel=1e-14)
    # sample variance of Gaussian errors has std error var*sqrt(2/(m-1))
    assert abs(err.var(ddof=1) - var) < 3 * var * math.sqrt(2 / (m - 1))


def test_encoder_symbol_has_power_p_in_expectation():
    m = 200_000
    ch = ChannelParams(2.0, 1.0, 0.5)
    rng = np.random.default_rng(5)
    x0 = rng.normal(0.0, 1.5, m)
    st_ = EstimatorState(0, 2.25, estimate=np.zeros(m))
    powers = []
    for g in (1, 0, 1, 1):
        s = encode(st_, x0, ch)
        powers.append(np.mean(s ** 2))
        decode_update(st_, g * s + rng.standard_normal(m), g, ch)
    assert powers == pytest.approx([2.0] * 4, rel=0.02)


def test_prior_var_must_be_positive():
    with pytest.raises(ValueError):
        EstimatorState(0, 0.0)


def test_long_run_keeps_variance_positive_and_symbols_finite():
    # 0.5^2000 underflows a double; the codec must survive it
    ch = ChannelParams(1.0, 1.0, 0.0)
    rng = np.random.default_rng(0)
    st_ = EstimatorState(0, 1.0)
    x0 = 0.37
    for _ in range(2000):
        s = encode(st_, x0, ch)
        assert math.isfinite(s)
        decode_update(st_, s + rng.standard_normal(), 1, ch)
    assert st_.error_var > 0 and st_.success_count == 2000
    assert st_.saturated
    assert st_.estimate == pytest.approx(x0, abs=1e-14)
    assert encode(st_, x0, ch) == 0.0
