"""Certainty-equivalent controller driven by estimates of the initial state.

With ``xhat`` an estimate of ``x0``, the controller applies
``u[t] = K (A^t xhat[t] + sum_{i=1..t} A^(t-i) B u[i-1])``. The bracket is
kept incrementally as ``z``:
``z[t+1] = A z[t] + B u[t] + A^(t+1) (xhat[t+1] - xhat[t])``.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import NotControllable, Overflow, ValidationError

Z_LIMIT = 1e12
CTRB_RCOND = 1e-9


def _ab(system, b=None) -> Tuple[np.ndarray, np.ndarray]:
    if b is None:
        a, b = system.a_matrix, system.input_vector
    else:
        a = system
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != (b.size, b.size):
        raise ValidationError(f"A {a.shape} and B ({b.size},) do not conform")
    return a, b


def controllability_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cols = [b]
    for _ in range(a.shape[0] - 1):
        cols.append(a @ cols[-1])
    return np.column_stack(cols)


def deadbeat_gain(system, b=None) -> np.ndarray:
    """Row gain ``K`` putting every eigenvalue of ``A + B K`` at the origin.

    Accepts a validated :class:`~nclab.model.SystemSpec` or a pair ``(A, B)``.
    Uses Ackermann's formula with the target polynomial ``z^N``:
    ``K = -e_N' C^{-1} A^N``.
    """
    a, b = _ab(system, b)
    n = a.shape[0]
    ctrb = controllability_matrix(a, b)
    sv = np.linalg.svd(ctrb, compute_uv=False)
    if sv[-1] <= CTRB_RCOND * sv[0]:
        raise NotControllable(f"controllability matrix is singular (rcond {sv[-1] / sv[0]:.3g})")
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    row = np.linalg.solve(ctrb.T, e_last)
    return -row @ np.linalg.matrix_power(a, n)


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


class ControllerState:
    """Per-trajectory controller memory.

    Call :meth:`step` once per time step with the current estimate of ``x0``;
    it returns the input to apply at that step.
    """

    def __init__(self, system, b=None, gain: Optional[Sequence[float]] = None,
                 initial_estimate: Optional[Sequence[float]] = None):
        self.a, self.b = _ab(system, b)
        n = self.a.shape[0]
        if gain is None:
            gain = deadbeat_gain(self.a, self.b)
        self.gain = np.asarray(gain, dtype=float).reshape(-1)
        if self.gain.size != n:
            raise ValidationError(f"gain has {self.gain.size} entries, expected {n}")
        if spectral_radius(self.a + np.outer(self.b, self.gain)) >= 1.0:
            raise ValidationError("A + B K is not Schur stable")
        est = np.zeros(n) if initial_estimate is None else np.asarray(initial_estimate, float)
        self.last_estimate = est.copy()
        self.reconstructed_state = est.copy()
        self.t = 0
        self._a_diag = np.diag(self.a).copy() if np.array_equal(self.a, np.diag(np.diag(self.a))) \
            else None
        # for diagonal A only the diagonal of A^t is stored
        self._a_pow = np.eye(n) if self._a_diag is None else np.ones(n)

    @property
    def a_power(self) -> np.ndarray:
        """``A^t`` for the current step."""
        return self._a_pow if self._a_diag is None else np.diag(self._a_pow)

    def step(self, new_estimate) -> float:
        """Input ``u[t]`` for the estimate available at time ``t``; then advance."""
        new_estimate = np.array(new_estimate, dtype=float)
        z = self.reconstructed_state
        diff = new_estimate - self.last_estimate
        if self._a_diag is not None:
            z = z + self._a_pow * diff
        else:
            z = z + self._a_pow @ diff
        u = float(self.gain @ z)
        if not max(map(abs, z.tolist())) <= Z_LIMIT:
            raise Overflow(f"|z| exceeded {Z_LIMIT:g} at t={self.t}")
        if self._a_diag is not None:
            self.reconstructed_state = self._a_diag * z + self.b * u
            self._a_pow = self._a_pow * self._a_diag
        else:
            self.reconstructed_state = self.a @ z + self.b * u
            self._a_pow = self.a @ self._a_pow
        self.last_estimate = new_estimate
        self.t += 1
        return u


def control_step(cs: ControllerState, new_estimate) -> Tuple[float, ControllerState]:
    u = cs.step(new_estimate)
    return u, cs


def direct_reconstruction(a, b, estimate, inputs: Sequence[float], t: int) -> np.ndarray:
    """Evaluate ``A^t xhat + sum_{i=1..t} A^(t-i) B u[i-1]`` without recursion."""
    a, b = _ab(a, b)
    z = np.linalg.matrix_power(a, t) @ np.asarray(estimate, float)
    for i in range(1, t + 1):
        z = z + np.linalg.matrix_power(a, t - i) @ b * inputs[i - 1]
    return z
