"""Plant and channel descriptions shared by every other module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NotSorted,
    NotStabilizable,
    StableEigenvalue,
    ValidationError,
)

PBH_TOL = 1e-9
_EIG_GROUP_TOL = 1e-8


@dataclass(frozen=True)
class EigenBlock:
    """One distinct unstable eigenvalue and its real Jordan block.

    Only ``log_magnitude`` enters the stabilizability conditions. ``angle``
    (argument of the eigenvalue, 0 or pi for real ones) is needed only to
    assemble ``A``.
    """

    log_magnitude: float
    is_complex: bool = False
    algebraic_multiplicity: int = 1
    angle: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.log_magnitude):
            raise ValidationError(f"log_magnitude must be finite, got {self.log_magnitude}")
        if int(self.algebraic_multiplicity) != self.algebraic_multiplicity or self.algebraic_multiplicity < 1:
            raise ValidationError("algebraic_multiplicity must be a positive integer")

    @property
    def a(self) -> int:
        """Real dimension of one eigen-direction: 2 for a complex pair, else 1."""
        return 2 if self.is_complex else 1

    @property
    def block_size(self) -> int:
        return self.algebraic_multiplicity * self.a

    @property
    def eigenvalue(self) -> complex:
        return cmath_rect(math.exp(self.log_magnitude), self.angle)

    def jordan_block(self) -> np.ndarray:
        r = math.exp(self.log_magnitude)
        m = self.algebraic_multiplicity
        if not self.is_complex:
            lam = -r if abs(abs(self.angle) - math.pi) < 1e-12 else r
            return lam * np.eye(m) + np.eye(m, k=1)
        c = r * np.array([[math.cos(self.angle), -math.sin(self.angle)],
                          [math.sin(self.angle), math.cos(self.angle)]])
        return np.kron(np.eye(m), c) + np.kron(np.eye(m, k=1), np.eye(2))


def cmath_rect(r: float, phi: float) -> complex:
    return complex(r * math.cos(phi), r * math.sin(phi))


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Single-input LTI plant ``x[t+1] = A x[t] + B u[t]``.

    Construct it loosely and pass it through :func:`validate_system`, which
    fills in ``a_matrix`` and ``initial_covariance`` and checks every
    structural assumption.
    """

    blocks: tuple = ()
    input_vector: Optional[np.ndarray] = None
    initial_covariance: Optional[np.ndarray] = None
    a_matrix: Optional[np.ndarray] = None
    validated: bool = field(default=False, repr=False)

    @classmethod
    def from_log_magnitudes(cls, log_magnitudes: Sequence[float], input_vector=None,
                            initial_covariance=None) -> "SystemSpec":
        """Real, diagonal plant with one block per log-magnitude.

        Equal magnitudes get alternating signs so the plant stays
        stabilizable with a single input.
        """
        blocks = []
        seen: dict = {}
        for ln in log_magnitudes:
            k = seen.get(ln, 0)
            seen[ln] = k + 1
            blocks.append(EigenBlock(float(ln), angle=math.pi if k % 2 else 0.0))
        if input_vector is None:
            input_vector = np.ones(len(blocks))
        return validate_system(cls(tuple(blocks), np.asarray(input_vector, float),
                                   None if initial_covariance is None
                                   else np.asarray(initial_covariance, float)))

    @property
    def state_dim(self) -> int:
        return sum(b.block_size for b in self.blocks)

    @property
    def log_magnitudes(self) -> np.ndarray:
        return np.array([b.log_magnitude for b in self.blocks], dtype=float)

    @property
    def is_real_diagonal(self) -> bool:
        return all(not b.is_complex and b.algebraic_multiplicity == 1 for b in self.blocks)


def _blocks_from_matrix(a: np.ndarray) -> tuple:
    eig = np.linalg.eigvals(a)
    # conjugates are represented once, by the member with positive imaginary part
    eig = [z for z in eig if z.imag >= -_EIG_GROUP_TOL]
    groups: list = []
    for z in eig:
        for g in groups:
            if abs(g[0] - z) < 1e-6 * max(1.0, abs(z)):
                g[1] += 1
                break
        else:
            groups.append([z, 1])
    blocks = []
    for z, m in groups:
        mag = abs(z)
        if mag <= 0:
            raise StableEigenvalue("A has a zero eigenvalue")
        is_complex = abs(z.imag) > _EIG_GROUP_TOL
        blocks.append(EigenBlock(math.log(mag), is_complex, m, float(np.angle(z))))
    blocks.sort(key=lambda b: -b.log_magnitude)
    return tuple(blocks)


def pbh_stabilizable(a: np.ndarray, b: np.ndarray, tol: float = PBH_TOL) -> bool:
    """PBH rank test of ``[lam I - A, B]`` at every eigenvalue with ``|lam| >= 1``."""
    n = a.shape[0]
    bcol = np.asarray(b, dtype=complex).reshape(n, 1)
    for lam in np.linalg.eigvals(a):
        if abs(lam) < 1.0 - 1e-12:
            continue
        m = np.hstack([lam * np.eye(n) - a, bcol])
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[-1] <= tol * max(1.0, sv[0]):
            return False
    return True


def validate_system(spec: SystemSpec) -> SystemSpec:
    """Check a plant description and return a completed, validated copy.

    Raises
    ------
    StableEigenvalue
        A block has negative log-magnitude.
    NotSorted
        Blocks are not in nonincreasing log-magnitude order.
    DimensionMismatch
        ``A``, ``B`` or the covariance do not match the block structure.
    NotStabilizable
        ``(A, B)`` fails the PBH test on a mode on or outside the unit circle.
    """
    blocks = tuple(spec.blocks)
    a = None if spec.a_matrix is None else np.array(spec.a_matrix, dtype=float)
    if a is not None and (a.ndim != 2 or a.shape[0] != a.shape[1]):
        raise DimensionMismatch(f"A must be square, got shape {a.shape}")
    if not blocks:
        if a is None:
            raise ValidationError("either blocks or a_matrix is required")
        blocks = _blocks_from_matrix(a)

    for i, blk in enumerate(blocks):
        if blk.log_magnitude < 0:
            raise StableEigenvalue(f"block {i} has log_magnitude {blk.log_magnitude} < 0")
    for i in range(1, len(blocks)):
        if blocks[i].log_magnitude > blocks[i - 1].log_magnitude:
            raise NotSorted(f"block {i} ({blocks[i].log_magnitude}) exceeds block {i - 1} "
                            f"({blocks[i - 1].log_magnitude})")

    n = sum(b.block_size for b in blocks)
    if a is None:
        a = _block_diag([b.jordan_block() for b in blocks])
    elif a.shape[0] != n:
        raise DimensionMismatch(f"A is {a.shape[0]}x{a.shape[0]} but blocks give N={n}")

    if spec.input_vector is None:
        raise ValidationError("input_vector is required")
    b = np.array(spec.input_vector, dtype=float).reshape(-1)
    if b.shape[0] != n:
        raise DimensionMismatch(f"input_vector has length {b.shape[0]}, expected {n}")

    if spec.initial_covariance is None:
        cov = np.eye(n)
    else:
        cov = np.array(spec.initial_covariance, dtype=float)
        if cov.shape != (n, n):
            raise DimensionMismatch(f"initial_covariance has shape {cov.shape}, expected {(n, n)}")
        if not np.allclose(cov, cov.T):
            raise ValidationError("initial_covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValidationError("initial_covariance must be positive definite") from None

    for arr in (a, b, cov):
        if not np.all(np.isfinite(arr)):
            raise ValidationError("non-finite entries in system description")

    if not pbh_stabilizable(a, b):
        raise NotStabilizable("(A, B) fails the PBH rank test on an unstable mode")

    for arr in (a, b, cov):
        arr.setflags(write=False)
    return replace(spec, blocks=blocks, input_vector=b, initial_covariance=cov,
                   a_matrix=a, validated=True)


def _block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n))
    i = 0
    for m in mats:
        k = m.shape[0]
        out[i:i + k, i:i + k] = m
        i += k
    return out


@dataclass(frozen=True)
class ChannelParams:
    """Erasure channel with additive Gaussian noise and an average power budget."""

    power: float
    noise_var: float
    drop_prob: float

    def __post_init__(self):
        for name in ("power", "noise_var", "drop_prob"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.power <= 0:
            raise ValidationError(f"power must be positive, got {self.power}")
        if self.noise_var <= 0:
            raise ValidationError(f"noise_var must be positive, got {self.noise_var}")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValidationError(f"drop_prob must lie in [0, 1), got {self.drop_prob}")

    @property
    def delta(self) -> float:
        return delta(self)


def delta(ch: ChannelParams) -> float:
    """Per-success error-variance contraction ``noise_var / (noise_var + power)``."""
    return ch.noise_var / (ch.noise_var + ch.power)
