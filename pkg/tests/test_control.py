import mpmath
import numpy as np
import pytest

from nclab.control import (
    ControllerState,
    control_step,
    deadbeat_gain,
    direct_reconstruction,
    spectral_radius,
)
from nclab.errors import NotControllable, Overflow, ValidationError
from nclab.model import SystemSpec

A2 = np.diag([2.0, 3.0])
B2 = np.array([1.0, 1.0])


def test_deadbeat_gain_examples():
    k = deadbeat_gain(A2, B2)
    assert k == pytest.approx([4.0, -9.0], abs=1e-12)
    closed = A2 + np.outer(B2, k)
    assert np.trace(closed) == pytest.approx(0, abs=1e-12)
    assert np.linalg.det(closed) == pytest.approx(0, abs=1e-12)
    # LAPACK resolves a defective zero eigenvalue only to ~sqrt(eps); use 50 digits
    with mpmath.workdps(50):
        eigs = mpmath.eig(mpmath.matrix(closed.tolist()))[0]
    assert max(abs(e) for e in eigs) < 1e-8
    assert deadbeat_gain(np.array([[2.0]]), np.array([1.0])) == pytest.approx([-2.0])
    with pytest.raises(NotControllable):
        deadbeat_gain(A2, np.array([1.0, 0.0]))


@pytest.mark.parametrize("lns", [[0.05, 0.03], [0.2, 0.1, 0.05], [0.3, 0.3, 0.1, 0.02]])
def test_deadbeat_is_nilpotent(lns):
    spec = SystemSpec.from_log_magnitudes(lns)
    k = deadbeat_gain(spec)
    closed = spec.a_matrix + np.outer(spec.input_vector, k)
    # characteristic polynomial z^N up to roundoff in the coefficients
    assert np.abs(np.poly(closed)[1:]).max() < 1e-8
    assert spectral_radius(closed) < 1e-2
    assert np.abs(np.linalg.matrix_power(closed, len(lns))).max() < 1e-8


def test_deadbeat_on_non_diagonal_plant():
    a = np.array([[1.2, 1.0], [0.0, 1.1]])
    b = np.array([0.0, 1.0])
    k = deadbeat_gain(a, b)
    assert np.abs(np.linalg.matrix_power(a + np.outer(b, k), 2)).max() < 1e-10


def test_recursion_matches_direct_formula_on_random_run():
    rng = np.random.default_rng(8)
    spec = SystemSpec.from_log_magnitudes([0.05, 0.03])
    cs = ControllerState(spec)
    est = np.zeros(2)
    inputs = []
    for t in range(200):
        if rng.random() < 0.3:
            est = est + rng.normal(size=2) * 0.9 ** t
        u, cs = control_step(cs, est)
        inputs.append(u)
        direct = direct_reconstruction(spec.a_matrix, spec.input_vector, est, inputs, t + 1)
        # deadbeat control makes z cancel to ~0, so compare against the size of the summands
        growth = np.exp(0.05 * (t + 1))
        scale = growth * max(np.abs(est).max(), np.abs(inputs).max())
        assert np.abs(cs.reconstructed_state - direct).max() <= 1e-6 * scale


def test_recursion_matches_direct_formula_general_matrix():
    a = np.array([[1.05, 0.2], [0.0, 1.02]])
    b = np.array([0.3, 1.0])
    cs = ControllerState(a, b)
    rng = np.random.default_rng(1)
    est = rng.normal(size=2)
    inputs = []
    for t in range(60):
        if t % 7 == 3:
            est = est + rng.normal(size=2) * 0.5 ** t
        inputs.append(cs.step(est))
    assert cs.reconstructed_state == pytest.approx(
        direct_reconstruction(a, b, est, inputs, 60), rel=1e-9, abs=1e-12)
    assert cs.a_power == pytest.approx(np.linalg.matrix_power(a, 60))


def test_all_erasures_cross_check_at_t5():
    spec = SystemSpec.from_log_magnitudes([0.05, 0.03])
    x0hat = np.array([0.7, -1.3])
    cs = ControllerState(spec)
    inputs = [cs.step(x0hat) for _ in range(5)]
    z5 = direct_reconstruction(spec.a_matrix, spec.input_vector, x0hat, inputs, 5)
    assert cs.reconstructed_state == pytest.approx(z5, rel=1e-12)
    # by hand: z_t = A^t x0hat + sum_{i=1..t} A^(t-i) B u_{i-1}
    a = spec.a_matrix
    hand = np.linalg.matrix_power(a, 5) @ x0hat
    for i in range(1, 6):
        hand = hand + np.linalg.matrix_power(a, 5 - i) @ spec.input_vector * inputs[i - 1]
    assert z5 == pytest.approx(hand, rel=1e-14)


def test_zero_gain_gives_zero_input():
    cs = ControllerState(np.diag([0.5, 0.9]), np.ones(2), gain=[0.0, 0.0])
    assert [cs.step([1.0, 2.0 + t]) for t in range(10)] == [0.0] * 10


def test_user_gain_must_stabilise():
    with pytest.raises(ValidationError):
        ControllerState(A2, B2, gain=[0.0, 0.0])
    with pytest.raises(ValidationError):
        ControllerState(A2, B2, gain=[1.0])


def test_deadbeat_drives_plant_to_zero_in_n_steps():
    spec = SystemSpec.from_log_magnitudes([0.4, 0.2, 0.1])
    x = np.array([1.0, -2.0, 0.5])
    cs = ControllerState(spec)
    for _ in range(3):
        u = cs.step(x.copy() if cs.t == 0 else cs.last_estimate)
        x = spec.a_matrix @ x + spec.input_vector * u
    assert np.abs(x).max() < 1e-10


def test_overflow_signalled():
    cs = ControllerState(np.array([[2.0]]), np.array([1.0]))
    with pytest.raises(Overflow):
        cs.step([1e13])
