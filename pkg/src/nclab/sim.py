"""Monte Carlo harnesses: closed loop, scheduler-only moments, martingale probe.

Every trial draws from its own seed, derived from ``(master_seed, trial)``,
so a trial's trace does not depend on how many other trials run or on the
order they run in.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import _csv
from .channel import STATE_STREAM, ChannelInstance, as_seed_sequence, substream, trial_seed
from .codec import EstimatorState, decode_update, encode
from .conditions import ThetaSolution, min_n1_for_contraction
from .control import ControllerState
from .errors import ConfigError, Overflow, UnsupportedSystem
from .model import ChannelParams, SystemSpec, delta
from .sched import ADAPTIVE_TDMA, FIXED_TDMA, KINDS, OPTIMAL2D, RoundRecord, Scheduler, make_scheduler

MAX_HORIZON = 10_000
DIVERGENCE_NORM = 1e9
PROBE_STREAM = 3
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SchedulerConfig:
    kind: str = ADAPTIVE_TDMA
    quotas: Optional[Tuple[int, ...]] = None
    n1: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scheduler kind {self.kind!r}")

    def build(self, ln_ls: Sequence[float], ch: ChannelParams) -> Scheduler:
        return make_scheduler(self.kind, quotas=self.quotas, n1=self.n1, ln_ls=list(ln_ls),
                              ch=ch, pairs=len(ln_ls))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_error: float
    samples: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "MomentEstimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        if n > 1 and np.ptp(x) > 0:
            se = float(np.std(x, ddof=1) / math.sqrt(n))
        else:
            se = 0.0
        mean = float(x[0]) if se == 0.0 else float(np.mean(x))
        return cls(mean, se, n)

    def below(self, value: float, k: float = 3.0) -> bool:
        """``mean`` is under ``value`` by more than ``k`` standard errors."""
        return self.mean + k * self.std_error < value

    def agrees(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error


# --- closed loop -------------------------------------------------------------------

@dataclass
class SimTrace:
    """One closed-loop trajectory, sampled at ``t = 0..horizon``.

    ``log_moment[i, t] = 2 t ln|l_i| + n_i(t) ln(delta)``, where ``n_i(t)``
    counts pair ``i``'s successful receptions in slots ``0..t-1``.
    ``state_sq_norm`` is NaN from the step at which the run diverged.
    """

    times: np.ndarray
    state_sq_norm: np.ndarray
    log_moment: np.ndarray
    owners: np.ndarray
    gammas: np.ndarray
    diverged: bool
    seed: Tuple[int, ...]
    diverged_at: Optional[int] = None
    inputs: np.ndarray = field(default=None, repr=False)

    @property
    def per_coordinate_moment(self) -> np.ndarray:
        return np.exp(self.log_moment)


def _check_simulable(spec: SystemSpec, horizon: int):
    if not spec.validated:
        raise ConfigError("run validate_system on the plant first")
    if not spec.is_real_diagonal:
        raise UnsupportedSystem("simulation supports real, diagonalisable plants with m_i = 1")
    a = spec.a_matrix
    if not np.array_equal(a, np.diag(np.diag(a))):
        raise UnsupportedSystem("simulation needs a diagonal A")
    if not 1 <= horizon <= MAX_HORIZON:
        raise ConfigError(f"horizon must be in [1, {MAX_HORIZON}]")


def run_closed_loop(spec: SystemSpec, ch: ChannelParams, scheduler: SchedulerConfig,
                    horizon: int, seed, gain=None, x0=None) -> SimTrace:
    """Simulate plant, scheduler, encoders, channel, decoders and controller.

    At step ``t`` the controller acts on the estimate built from slots
    ``0..t-1``; then the owner of slot ``t`` transmits and its decoder
    updates.
    """
    _check_simulable(spec, horizon)
    ss = as_seed_sequence(seed)
    n = spec.state_dim
    ln_ls = spec.log_magnitudes
    a_diag = np.diag(spec.a_matrix).copy()
    b = spec.input_vector
    if x0 is None:
        chol = np.linalg.cholesky(spec.initial_covariance)
        x0 = chol @ substream(ss, STATE_STREAM).standard_normal(n)
    x0 = np.asarray(x0, dtype=float)
    x0_list = x0.tolist()

    sched = scheduler.build(ln_ls, ch)
    chan = ChannelInstance(ch, ss)
    codecs = [EstimatorState(i, float(spec.initial_covariance[i, i])) for i in range(n)]
    ctrl = ControllerState(spec, gain=gain)

    x = x0.copy()
    estimate = np.zeros(n)
    sq = np.full(horizon + 1, np.nan)
    owners = np.empty(horizon, dtype=np.int64)
    gammas = np.empty(horizon, dtype=np.int8)
    inputs = np.full(horizon, np.nan)
    diverged_at = None
    for t in range(horizon):
        if diverged_at is None:
            sq[t] = float(x @ x)
            try:
                u = ctrl.step(estimate)
            except Overflow:
                diverged_at = t
        i = sched.owner
        st = codecs[i]
        r, gamma = chan.transmit(encode(st, x0_list[i], ch))
        if gamma:
            decode_update(st, r, gamma, ch)
            estimate[i] = st.estimate
        sched.step(gamma)
        owners[t] = i
        gammas[t] = gamma
        if diverged_at is None:
            inputs[t] = u
            x = a_diag * x + b * u
            if not math.sqrt(float(x @ x)) <= DIVERGENCE_NORM:
                diverged_at = t + 1
    if diverged_at is None:
        sq[horizon] = float(x @ x)

    return SimTrace(np.arange(horizon + 1), sq, _log_moments(ln_ls, owners, gammas, ch),
                    owners, gammas, diverged_at is not None, tuple(ss.spawn_key),
                    diverged_at, inputs)


def _log_moments(ln_ls: np.ndarray, owners: np.ndarray, gammas: np.ndarray,
                 ch: ChannelParams) -> np.ndarray:
    horizon = owners.size
    k = len(ln_ls)
    counts = np.zeros((k, horizon + 1))
    for i in range(k):
        counts[i, 1:] = np.cumsum((owners == i) & (gammas == 1))
    t = np.arange(horizon + 1)
    return 2.0 * np.outer(ln_ls, t) + counts * math.log(delta(ch))


# --- decay curves over many trials ----------------------------------------------------

@dataclass
class DecayCurves:
    """Trial averages of the closed-loop diagnostics at every ``t``."""

    times: np.ndarray
    log_mean_moment: np.ndarray        # (pairs, horizon + 1)
    mean_sq_norm: np.ndarray           # over trials not yet diverged
    diverged_fraction: np.ndarray
    trials: int
    checkpoints: np.ndarray
    trend_slope: np.ndarray            # d/dt of log mean moment, least squares over checkpoints

    @property
    def mean_moment(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_mean_moment)

    def to_csv(self, dest=None):
        k = self.log_mean_moment.shape[0]
        header = ["t"] + [f"mean_moment_{i + 1}" for i in range(k)] + ["mean_sq_norm",
                                                                         "diverged_fraction"]
        mm = self.mean_moment
        rows = ((int(t), *mm[:, t], self.mean_sq_norm[t], self.diverged_fraction[t])
                for t in self.checkpoints)
        return _csv.write_rows(dest, header, rows)


def default_checkpoints(horizon: int) -> np.ndarray:
    step = max(1, horizon // 20)
    pts = list(range(0, horizon + 1, step))
    if pts[-1] != horizon:
        pts.append(horizon)
    return np.array(pts)


def _trial_worker(args):
    spec, ch, scheduler, horizon, master_seed, gain, indices = args
    out = []
    for k in indices:
        tr = run_closed_loop(spec, ch, scheduler, horizon, trial_seed(master_seed, k), gain)
        out.append((tr.log_moment, tr.state_sq_norm, tr.diverged_at))
    return out


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("NCLAB_THREADS", "1")))
    except ValueError:
        return 1


def montecarlo_moments(spec: SystemSpec, ch: ChannelParams, scheduler: SchedulerConfig,
                       trials: int, horizon: int, master_seed: int, gain=None,
                       workers: Optional[int] = None) -> DecayCurves:
    """Average ``l_i^(2t) delta^(n_i(t))`` and ``|x_t|^2`` over closed-loop trials.

    Means of the moments are taken in the log domain (log-sum-exp), so large
    or tiny per-trial values never overflow in the aggregation.
    """
    if trials < 1:
        raise ConfigError("trials must be positive")
    _check_simulable(spec, horizon)
    workers = workers or thread_cap()
    chunks = [list(range(i, trials, workers)) for i in range(workers)] if workers > 1 \
        else [list(range(trials))]
    jobs = [(spec, ch, scheduler, horizon, master_seed, gain, c) for c in chunks if c]
    if len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(_trial_worker, jobs))
    else:
        parts = [_trial_worker(jobs[0])]
    by_trial: dict = {}
    for idx_chunk, res in zip((j[-1] for j in jobs), parts):
        by_trial.update(zip(idx_chunk, res))
    results = [by_trial[k] for k in range(trials)]

    logs = np.stack([r[0] for r in results])            # (trials, pairs, T+1)
    sq = np.stack([r[1] for r in results])              # (trials, T+1)
    div_at = np.array([horizon + 1 if r[2] is None else r[2] for r in results])
    times = np.arange(horizon + 1)
    log_mean = logsumexp(logs, axis=0) - math.log(trials)
    alive = ~np.isnan(sq)
    with np.errstate(invalid="ignore"):
        mean_sq = np.where(alive.any(axis=0), np.nansum(sq, axis=0) / alive.sum(axis=0), np.nan)
    diverged_fraction = (div_at[:, None] <= times[None, :]).mean(axis=0)
    cps = default_checkpoints(horizon)
    slope = np.polyfit(cps.astype(float), log_mean[:, cps].T, 1)[0] if cps.size > 1 \
        else np.zeros(logs.shape[1])
    return DecayCurves(times, log_mean, mean_sq, diverged_fraction, trials, cps,
                       np.atleast_1d(slope))


# --- scheduler-only moments -----------------------------------------------------------

@dataclass
class SchedulerMoments:
    """Round-level moment estimates for every pair.

    ``round_moments[i]`` estimates ``E[l_i^(2 T_round) delta^(successes_i)]``;
    ``phase_moments[i]`` estimates ``E[l_i^(2 T_i)]`` over pair ``i``'s own
    phase durations.
    """

    round_moments: Tuple[MomentEstimate, ...]
    phase_moments: Tuple[MomentEstimate, ...]
    rounds: List[RoundRecord]

    def round_log_csv(self, kind: str, dest=None):
        if kind == OPTIMAL2D:
            rows = ((k + 1, r.durations[0], r.durations[1], r.successes[1])
                    for k, r in enumerate(self.rounds))
            return _csv.write_rows(dest, ["round", "T1", "T2", "n2"], rows)
        pairs = len(self.rounds[0].durations) if self.rounds else 0
        rows = ((k + 1, *r.durations) for k, r in enumerate(self.rounds))
        return _csv.write_rows(dest, ["round"] + [f"T_{i + 1}" for i in range(pairs)], rows)


def simulate_rounds(sched: Scheduler, ch: ChannelParams, rounds: int, seed) -> List[RoundRecord]:
    """Drive ``sched`` with the erasure stream of ``seed`` until ``rounds`` complete."""
    rng = substream(seed, 0)
    eps = ch.drop_prob
    step = sched.step
    log = sched.round_log
    while len(log) < rounds:
        for g in (rng.random(_CHUNK) >= eps).tolist():
            step(g)
            if len(log) >= rounds:
                break
    return log[:rounds]


def scheduler_moment_mc(scheduler: SchedulerConfig, ln_ls: Sequence[float], ch: ChannelParams,
                        rounds: int, seed) -> SchedulerMoments:
    """Erasure-only simulation of i.i.d. rounds (no noise, no plant)."""
    ln = np.asarray(ln_ls, dtype=float)
    sched = scheduler.build(ln, ch)
    recs = simulate_rounds(sched, ch, rounds, seed)
    dur = np.array([r.durations for r in recs], dtype=float)
    succ = np.array([r.successes for r in recs], dtype=float)
    total = dur.sum(axis=1)
    ln_delta = math.log(delta(ch))
    round_m = []
    phase_m = []
    for i, li in enumerate(ln):
        round_m.append(MomentEstimate.from_samples(np.exp(2.0 * li * total + succ[:, i] * ln_delta)))
        own = dur[:, i]
        if scheduler.kind == OPTIMAL2D and i > 0:
            own = own[own > 0]
        phase_m.append(MomentEstimate.from_samples(np.exp(2.0 * li * own)))
    return SchedulerMoments(tuple(round_m), tuple(phase_m), recs)


def negative_binomial_moment_mc(ln_l: float, n: int, ch: ChannelParams, samples: int,
                                seed) -> MomentEstimate:
    """Estimate ``E[l^(2T)]``, ``T`` = slots to collect ``n`` successes, by sampling ``T``."""
    rng = substream(seed, PROBE_STREAM)
    t = n + rng.negative_binomial(n, 1.0 - ch.drop_prob, size=samples)
    return MomentEstimate.from_samples(np.exp(2.0 * ln_l * t))


# --- martingale probe ------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    one_step: MomentEstimate
    stopped: MomentEstimate
    n1: int
    max_phase2: int


def phase2_stop(t1: np.ndarray, gammas: np.ndarray, n1: int, phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised phase-2 stopping rule.

    ``gammas`` has one row per episode. Returns ``(T2, S)``: the first slot
    count at which successes strictly exceed ``n1 + (T1 + T2) phi``, and the
    successes at that slot.
    """
    width = gammas.shape[1]
    s = np.cumsum(gammas, axis=1)
    steps = np.arange(1, width + 1)
    thr = n1 + (t1[:, None] + steps[None, :]) * phi
    hit = s > thr
    if not hit.any(axis=1).all():
        raise RuntimeError("phase-2 window too short for some episodes")
    idx = hit.argmax(axis=1)
    return idx + 1, s[np.arange(s.shape[0]), idx]


def martingale_probe(theta_sol: ThetaSolution, ch: ChannelParams, samples: int, seed,
                     n1: Optional[int] = None, episodes: Optional[int] = None) -> ProbeResult:
    """Check ``E[exp(theta*gamma + b)] = 1`` and ``E[Y at phase-2 stop] = 1``.

    ``Y_t = exp(theta S_t + b t)`` with ``S_t`` the phase-2 successes after
    ``t`` slots. Episodes are phase-2 runs following a phase 1 short enough
    for phase 2 to start.
    """
    theta, b = theta_sol.theta, theta_sol.drift
    eps = ch.drop_prob
    rng = substream(seed, 0)
    g = (rng.random(samples) >= eps).astype(float)
    one = MomentEstimate.from_samples(np.exp(theta * g + b))

    if n1 is None:
        n1 = min_n1_for_contraction(theta_sol, theta_sol.ln_l1, ch)
    episodes = samples if episodes is None else episodes
    phi = theta_sol.phi
    tc = -n1 / phi
    width = int(math.ceil(tc)) + 2
    ep_rng = substream(seed, PROBE_STREAM)
    ys: List[np.ndarray] = []
    got = 0
    while got < episodes:
        batch = max(1024, 2 * (episodes - got))
        t1 = n1 + ep_rng.negative_binomial(n1, 1.0 - eps, size=batch)
        t1 = t1[n1 + t1 * phi > 0][: episodes - got]
        gam = (ep_rng.random((t1.size, width)) >= eps).astype(np.int64)
        t2, s = phase2_stop(t1, gam, n1, phi)
        ys.append(np.exp(theta * s + b * t2))
        got += t1.size
    stopped = MomentEstimate.from_samples(np.concatenate(ys))
    return ProbeResult(one, stopped, n1, width)
