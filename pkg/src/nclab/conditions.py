"""Mean-square stabilizability tests and the quantities the schedulers need.

Every inequality here is strict: a point sitting exactly on a threshold is
classified as not stabilizable.

All criteria take either a :class:`~nclab.model.SystemSpec` or a plain
sequence of :class:`~nclab.model.EigenBlock`, so that grid sweeps do not
have to build (and PBH-check) a full plant for every cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import _csv
from .errors import (
    CapExceeded,
    DegenerateEqualMagnitudes,
    DivergentMoment,
    Infeasible,
    NoRoot,
    OrderViolation,
    ValidationError,
)
from .model import ChannelParams, EigenBlock, delta

THETA_TOL = 1e-10
THETA_MAX_ITER = 200
BRACKET_SHRINK = 1e-12


def _blocks(system) -> Sequence[EigenBlock]:
    return system.blocks if hasattr(system, "blocks") else system


def erasure_mix(ch: ChannelParams, exponent: float = 1.0) -> float:
    """``eps + (1 - eps) * delta**exponent``: mean contraction of one slot."""
    return ch.drop_prob + (1.0 - ch.drop_prob) * delta(ch) ** exponent


def tdma_threshold(ch: ChannelParams) -> float:
    return -0.5 * math.log(erasure_mix(ch))


def pair_sum_threshold(ch: ChannelParams) -> float:
    """Bound on ``ln|l1| + ln|l2|`` for two real modes."""
    return -math.log(erasure_mix(ch, 0.5))


def equal_magnitude_threshold(total_block_size: int, ch: ChannelParams) -> float:
    return -0.5 * math.log(erasure_mix(ch, 1.0 / total_block_size))


# --- the four criteria -------------------------------------------------------

def tdma_sufficient(system, ch: ChannelParams) -> bool:
    """Fixed-period TDMA sufficient condition (sum of mu_i ln|l_i| under one budget)."""
    total = sum(b.block_size * b.log_magnitude for b in _blocks(system))
    return total < tdma_threshold(ch)


@dataclass(frozen=True)
class NecessityCheck:
    holds: bool
    violating_selection: Optional[Tuple[int, ...]] = None
    v_total: Optional[int] = None


def necessity_holds(system, ch: ChannelParams) -> NecessityCheck:
    """Enumerate every sub-selection of modes and test the necessary condition.

    For each choice ``v_i in {0..m_i}`` (not all zero) with
    ``v = sum(a_i v_i)`` the selection must satisfy
    ``sum(a_i v_i ln|l_i|) < -(v/2) ln(eps + (1-eps) delta**(1/v))``.
    The first failing selection in lexicographic order is reported.
    """
    blocks = _blocks(system)
    ranges = [range(b.algebraic_multiplicity + 1) for b in blocks]
    for sel in itertools.product(*ranges):
        v = sum(b.a * vi for b, vi in zip(blocks, sel))
        if v == 0:
            continue
        lhs = sum(b.a * vi * b.log_magnitude for b, vi in zip(blocks, sel))
        rhs = -0.5 * v * math.log(erasure_mix(ch, 1.0 / v))
        if not lhs < rhs:
            return NecessityCheck(False, tuple(sel), v)
    return NecessityCheck(True)


@dataclass(frozen=True)
class AlphaVector:
    """Per-mode minimum channel-time fractions for the adaptive TDMA scheme.

    ``witness`` is a valid fraction vector (positive, summing to one, each
    entry strictly above its minimum) when ``feasible``; otherwise ``None``.
    """

    minimum_fractions: Tuple[float, ...]
    feasible: bool
    witness: Optional[Tuple[float, ...]] = None


def min_fraction(block: EigenBlock, ch: ChannelParams) -> float:
    """Smallest channel share making the adaptive-TDMA inequality hold for one mode.

    Returns ``inf`` when no share works, i.e. when ``eps * |l|**2 >= 1``.
    """
    ln = block.log_magnitude
    eps = ch.drop_prob
    if ln > 0 and math.exp(-2.0 * ln) <= eps:
        return math.inf
    # ln[(|l|^-2 - eps) / (1 - eps)], written to keep precision near |l| = 1
    log_ratio = math.log1p(math.expm1(-2.0 * ln) / (1.0 - eps))
    return max(0.0, block.block_size * log_ratio / math.log(delta(ch)))


def adaptive_feasible(system, ch: ChannelParams) -> AlphaVector:
    blocks = _blocks(system)
    mins = tuple(min_fraction(b, ch) for b in blocks)
    total = sum(mins)
    if not total < 1.0:
        return AlphaVector(mins, False)
    slack = 1.0 - total
    mu = [b.block_size for b in blocks]
    mu_sum = sum(mu)
    witness = tuple(m + slack * w / mu_sum for m, w in zip(mins, mu))
    return AlphaVector(mins, True, witness)


def optimal2d_condition(ln_l1: float, ln_l2: float, ch: ChannelParams) -> bool:
    """Necessary-and-sufficient test for a two-mode real plant under the optimal scheduler."""
    if ln_l1 < ln_l2:
        raise OrderViolation(f"expected ln_l1 >= ln_l2, got {ln_l1} < {ln_l2}")
    if ln_l2 < 0:
        raise ValidationError("log-magnitudes must be nonnegative")
    return ln_l1 < tdma_threshold(ch) and ln_l1 + ln_l2 < pair_sum_threshold(ch)


def equal_magnitude_condition(common_ln: float, total_block_size: int, ch: ChannelParams) -> bool:
    if total_block_size < 1:
        raise ValidationError("total_block_size must be at least 1")
    return common_ln < equal_magnitude_threshold(total_block_size, ch)


# --- scheduler parameters ------------------------------------------------------

def _log_phase_growth(ln_l: float, eps: float) -> float:
    """``ln[l^2 (1-eps) / (1 - eps l^2)]``; caller guarantees ``eps l^2 < 1``."""
    lam2 = math.exp(2.0 * ln_l)
    return 2.0 * ln_l + math.log1p(-eps) - math.log1p(-eps * lam2)


def expected_round_factor(ln_l: float, n: int, ch: ChannelParams) -> float:
    """``E[l^(2T)]`` for ``T`` the slots needed to collect ``n`` successes.

    Closed form ``(l^2 (1-eps) / (1 - eps l^2))**n`` of the negative-binomial
    moment generating function.

    Raises
    ------
    DivergentMoment
        If ``eps * l^2 >= 1``; the series has no finite sum.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    eps = ch.drop_prob
    if eps * math.exp(2.0 * ln_l) >= 1.0:
        raise DivergentMoment(f"eps*l^2 = {eps * math.exp(2.0 * ln_l):.6g} >= 1")
    return math.exp(n * _log_phase_growth(ln_l, eps))


def quota_search(system, ch: ChannelParams, cap: int = 200) -> Tuple[int, ...]:
    """Smallest success quotas that make every mode contract over one round.

    Searches totals ``1, 2, ..., cap`` in increasing order and, within a
    total, quota vectors in lexicographic order; every quota is at least 1.
    For blocks with ``mu_i > 1`` the block's share is spread over its
    ``mu_i`` real coordinates.
    """
    blocks = _blocks(system)
    if not adaptive_feasible(blocks, ch).feasible:
        raise Infeasible("adaptive TDMA condition has no feasible allocation")
    eps = ch.drop_prob
    ln_delta = math.log(delta(ch))
    growth = [_log_phase_growth(b.log_magnitude, eps) for b in blocks]
    mu = [b.block_size for b in blocks]
    k = len(blocks)

    def ok(quotas, total):
        return all(g + (q / total) * ln_delta / m < 0 for g, q, m in zip(growth, quotas, mu))

    for total in range(k, cap + 1):
        for quotas in _compositions(total, k):
            if ok(quotas, total):
                return quotas
    raise CapExceeded(f"no quota vector with total <= {cap}")


def _compositions(total: int, parts: int):
    """Positive integer vectors of given length and sum, lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# --- theta equation --------------------------------------------------------------

@dataclass(frozen=True)
class ThetaSolution:
    """Root of the exponential-tilt equation and the associated martingale drift."""

    theta: float
    phi: float
    drift: float
    residual: float
    ln_l1: float = field(default=float("nan"))
    ln_l2: float = field(default=float("nan"))

    @property
    def b(self) -> float:
        return self.drift


def theta_function(ln_l1: float, ln_l2: float, ch: ChannelParams) -> Callable[[float], float]:
    """``f(theta) = theta*phi - ln[(1-eps) e^theta + eps] - 2 ln|l1|``."""
    eps = ch.drop_prob
    phi = 2.0 * (ln_l1 - ln_l2) / math.log(delta(ch))

    def f(theta: float) -> float:
        return theta * phi - math.log((1.0 - eps) * math.exp(theta) + eps) - 2.0 * ln_l1

    return f


def martingale_drift(theta: float, ch: ChannelParams) -> float:
    eps = ch.drop_prob
    return -math.log((1.0 - eps) * math.exp(theta) + eps)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = THETA_TOL,
           max_iter: int = THETA_MAX_ITER) -> Tuple[float, float]:
    """Bisection on a bracket with ``f(lo) > 0 > f(hi)`` (or the reverse).

    Returns ``(x, f(x))``. Iterates until ``|f(x)|`` drops below ``tol`` *and*
    a few more halvings have been spent, or the bracket stops shrinking.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo, flo
    if fhi == 0.0:
        return hi, fhi
    if (flo > 0) == (fhi > 0):
        raise NoRoot(f"f({lo}) = {flo} and f({hi}) = {fhi} do not bracket a root")
    best = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) < abs(best[1]):
            best = (mid, fm)
        if fm == 0.0:
            break
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if abs(best[1]) < tol * 1e-3:
            break
    return best


def solve_theta(ln_l1: float, ln_l2: float, ch: ChannelParams) -> ThetaSolution:
    """Solve for the tilt ``theta`` in ``(ln(delta)/2, 0)``.

    Raises
    ------
    DegenerateEqualMagnitudes
        ``ln_l1 == ln_l2``: the slope ``phi`` vanishes and the equal-magnitude
        criterion applies instead.
    NoRoot
        The pair-sum condition fails, so the function does not change sign
        on the bracket.
    """
    if ln_l1 == ln_l2:
        raise DegenerateEqualMagnitudes("theta equation needs distinct magnitudes")
    if ln_l1 < ln_l2:
        raise OrderViolation(f"expected ln_l1 > ln_l2, got {ln_l1} < {ln_l2}")
    if ln_l2 < 0:
        raise ValidationError("log-magnitudes must be nonnegative")
    f = theta_function(ln_l1, ln_l2, ch)
    lo = 0.5 * math.log(delta(ch)) + BRACKET_SHRINK
    hi = -BRACKET_SHRINK
    if not (f(lo) > 0 and f(hi) < 0):
        raise NoRoot(f"pair-sum condition violated: ln_l1 + ln_l2 = {ln_l1 + ln_l2:.10g} "
                     f">= {pair_sum_threshold(ch):.10g}")
    theta, res = bisect(f, lo, hi)
    if not abs(res) < THETA_TOL:
        raise NoRoot(f"bisection stalled with residual {res:.3g}")
    phi = 2.0 * (ln_l1 - ln_l2) / math.log(delta(ch))
    return ThetaSolution(theta, phi, martingale_drift(theta, ch), res, ln_l1, ln_l2)


def min_n1_for_contraction(theta_sol: ThetaSolution, ln_l1: float, ch: ChannelParams,
                           cap: int = 1000) -> int:
    """Smallest phase-1 quota giving a round-moment bound below one.

    Scans ``n = 1..cap`` for ``2 (delta e^{-2 theta})**n + rho**n < 1`` with
    ``rho = l1^2 delta (1-eps) / (1 - eps l1^2)``. The overshoot constant of
    the stopping rule is taken as 0, the worst case.
    """
    d = delta(ch)
    eps = ch.drop_prob
    if eps * math.exp(2.0 * ln_l1) >= 1.0:
        raise DivergentMoment("eps*l1^2 >= 1: phase-1 moment is infinite")
    q = d * math.exp(-2.0 * theta_sol.theta)
    rho = math.exp(_log_phase_growth(ln_l1, eps)) * d
    for n in range(1, cap + 1):
        if 2.0 * q ** n + rho ** n < 1.0:
            return n
    raise CapExceeded(f"no n1 <= {cap} (delta*e^(-2theta) = {q:.6g}, rho = {rho:.6g})")


def oracle_allocation(ln_ls: Sequence[float], t: int, n: float, ch: ChannelParams) -> np.ndarray:
    """Non-causal split of ``n`` successes that equalises ``l_i^(2t) delta^(n_i)``.

    Entries can be negative for strongly skewed spectra at large ``t``; they
    are returned as computed.
    """
    ln = np.asarray(ln_ls, dtype=float)
    if ln.ndim != 1 or ln.size < 1:
        raise ValidationError("need at least one log-magnitude")
    ln_delta = math.log(delta(ch))
    share = 2.0 * t * ln / ln_delta
    return (n + share.sum()) / ln.size - share


# --- region sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class RegionCell:
    ln_l1: float
    ln_l2: float
    necessary: bool
    tdma: bool
    adaptive: bool
    optimal2d: bool


@dataclass
class RegionReport:
    grid: List[RegionCell]
    resolution: int
    ln_max: float

    HEADER = ("ln_l1", "ln_l2", "necessary", "tdma", "adaptive", "optimal2d")

    def ordered(self) -> List[RegionCell]:
        """Cells with ``ln_l1 >= ln_l2``, where the labelling is meaningful."""
        return [c for c in self.grid if c.ln_l1 >= c.ln_l2]

    def to_csv(self, dest=None):
        rows = ((c.ln_l1, c.ln_l2, c.necessary, c.tdma, c.adaptive, c.optimal2d)
                for c in self.grid)
        return _csv.write_rows(dest, self.HEADER, rows)


def classify_pair(ln_a: float, ln_b: float, ch: ChannelParams) -> Tuple[bool, bool, bool, bool]:
    """(necessary, tdma, adaptive, optimal2d) for a real two-mode plant, any order."""
    hi, lo = (ln_a, ln_b) if ln_a >= ln_b else (ln_b, ln_a)
    blocks = (EigenBlock(hi), EigenBlock(lo))
    return (necessity_holds(blocks, ch).holds,
            tdma_sufficient(blocks, ch),
            adaptive_feasible(blocks, ch).feasible,
            optimal2d_condition(hi, lo, ch))


def region_sweep(ch: ChannelParams, ln_max: float, resolution: int) -> RegionReport:
    """Classify a ``resolution x resolution`` grid over ``[0, ln_max]^2``.

    Rows are ordered by ``ln_l1`` then ``ln_l2``, both ascending. Cells below
    the diagonal are labelled through the sorted pair, so the sweep is
    symmetric; :meth:`RegionReport.ordered` gives the ``ln_l1 >= ln_l2`` half.
    """
    if resolution < 2:
        raise ValidationError("resolution must be at least 2")
    if not ln_max > 0:
        raise ValidationError("ln_max must be positive")
    axis = np.linspace(0.0, ln_max, resolution)
    cache: dict = {}
    cells = []
    for i, a in enumerate(axis):
        for j, b in enumerate(axis):
            key = (i, j) if i >= j else (j, i)
            flags = cache.get(key)
            if flags is None:
                flags = cache[key] = classify_pair(float(a), float(b), ch)
            cells.append(RegionCell(float(a), float(b), *flags))
    return RegionReport(cells, resolution, float(ln_max))
