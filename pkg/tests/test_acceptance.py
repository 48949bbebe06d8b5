"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdicts are
repeated in an "acceptance criteria" section of the terminal summary.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import record
from nclab import conditions as C
from nclab.channel import ChannelInstance
from nclab.codec import EstimatorState, decode_update, encode
from nclab.control import deadbeat_gain
from nclab.errors import NoRoot, NotControllable
from nclab.model import ChannelParams, SystemSpec
from nclab.sched import AdaptiveTDMA
from nclab.sim import (
    SchedulerConfig,
    martingale_probe,
    montecarlo_moments,
    negative_binomial_moment_mc,
    scheduler_moment_mc,
    simulate_rounds,
)

CH = ChannelParams(power=1.0, noise_var=1.0, drop_prob=0.7)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def verdict(number, checks, detail):
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record(number, ok, detail + ("" if ok else f" [failed: {', '.join(failed)}]"))
    assert ok, failed


def test_criterion_1_thresholds():
    with mpmath.workdps(50):
        eps, d = mpmath.mpf("0.7"), mpmath.mpf("0.5")
        tdma = -mpmath.log(eps + (1 - eps) * d) / 2
        pair = -mpmath.log(eps + (1 - eps) * mpmath.sqrt(d))
        diag = -mpmath.log(eps + (1 - eps) * d ** (mpmath.mpf(1) / 2)) / 2
        oracle = [float(tdma), float(pair), float(diag)]
    with Timer() as t:
        got = [C.tdma_threshold(CH), C.pair_sum_threshold(CH), C.equal_magnitude_threshold(2, CH)]
    errs = [abs(g - o) for g, o in zip(got, oracle)]
    verdict(1, {"accuracy": max(errs) < 1e-9, "runtime": t.elapsed < 1.0},
            f"bounds {got[0]:.10f} {got[1]:.10f} {got[2]:.10f}, max abs err {max(errs):.1e}, "
            f"{t.elapsed:.3f}s")


def test_criterion_2_region_containment():
    with Timer() as t:
        rep = C.region_sweep(CH, 0.12, 200)
    cells = rep.ordered()
    chain = sum(1 for c in cells if (c.tdma and not c.adaptive) or (c.adaptive and not c.optimal2d)
                or (c.optimal2d and not c.necessary))
    opt_vs_nec = sum(1 for c in cells if c.optimal2d != c.necessary)
    boundary = [c for c in cells if c.ln_l1 == c.ln_l2 or c.ln_l2 == 0.0]
    touch_mismatch = sum(1 for c in boundary if c.adaptive != c.optimal2d)
    gap = [c for c in cells if c.adaptive != c.optimal2d]
    gap_on_boundary = sum(1 for c in gap if c.ln_l1 == c.ln_l2 or c.ln_l2 == 0.0)
    checks = {
        "chain": chain == 0,
        "optimal2d==necessary": opt_vs_nec == 0,
        "touch on diagonal/axis": touch_mismatch == 0,
        "strict gap elsewhere": len(gap) > 0 and gap_on_boundary == 0,
        "runtime": t.elapsed < 10.0,
    }
    verdict(2, checks, f"{len(cells)} ordered cells, chain violations {chain}, "
                       f"optimal2d!=necessary {opt_vs_nec}, adaptive<optimal on {len(gap)} "
                       f"interior cells, {t.elapsed:.2f}s")


def test_criterion_3_negative_binomial_moment():
    ln = 0.5 * math.log(1.1)
    with Timer() as t:
        ests = [negative_binomial_moment_mc(ln, n, CH, 1_000_000, seed=100 + n) for n in (1, 3)]
    target = [C.expected_round_factor(ln, n, CH) for n in (1, 3)]
    assert target[0] == pytest.approx(1.434783, abs=1e-6)
    z = [abs(e.mean - v) / e.std_error for e, v in zip(ests, target)]
    verdict(3, {"n=1": z[0] < 3, "n=3": z[1] < 3, "runtime": t.elapsed < 10.0},
            f"means {ests[0].mean:.5f} vs {target[0]:.5f}, {ests[1].mean:.5f} vs "
            f"{target[1]:.5f}, |z| = {z[0]:.2f}, {z[1]:.2f}, {t.elapsed:.2f}s")


def test_criterion_4_phase_duration_law():
    from scipy import stats

    rounds = 100_000
    with Timer() as t:
        recs = simulate_rounds(AdaptiveTDMA((2, 1)), CH, rounds, seed=404)
    t1 = np.array([r.durations[0] for r in recs])
    extra = t1 - 2
    kmax = int(extra.max())
    emp = np.bincount(extra, minlength=kmax + 1) / rounds
    pmf = stats.nbinom.pmf(np.arange(kmax + 1), 2, 0.3)
    tv = 0.5 * (np.abs(emp - pmf).sum() + (1 - pmf.sum()))
    verdict(4, {"tv": tv < 0.01, "runtime": t.elapsed < 5.0},
            f"total variation {tv:.4f} over {rounds} rounds, {t.elapsed:.2f}s")


def test_criterion_5_round_contraction():
    sol = C.solve_theta(0.05, 0.03, CH)
    n1 = C.min_n1_for_contraction(sol, 0.05, CH)
    with Timer() as t:
        res = scheduler_moment_mc(SchedulerConfig("optimal2d", n1=n1), [0.05, 0.03], CH,
                                  100_000, seed=505)
    m1, m2 = res.round_moments
    verdict(5, {"n1=10": n1 == 10, "pair 1": m1.below(1.0), "pair 2": m2.below(1.0),
                "runtime": t.elapsed < 30.0},
            f"n1={n1}, round moments {m1.mean:.4f}+-{m1.std_error:.4f}, "
            f"{m2.mean:.4f}+-{m2.std_error:.4f}, {t.elapsed:.2f}s")


def test_criterion_6_theta_solver():
    with Timer() as t:
        sol = C.solve_theta(0.05, 0.03, CH)
        try:
            C.solve_theta(0.06, 0.035, CH)
            no_root = False
        except NoRoot:
            no_root = True
    # independent oracle: fine-grid scan for the sign change
    phi = 2 * (0.05 - 0.03) / math.log(0.5)
    grid = np.linspace(0.5 * math.log(0.5), 0.0, 4_000_001)
    f = grid * phi - np.log(0.3 * np.exp(grid) + 0.7) - 0.1
    scan = grid[np.argmax(f < 0)]
    checks = {
        "bracket": -0.346574 < sol.theta < 0,
        "residual": abs(sol.residual) < 1e-10,
        "vs -0.3061": abs(sol.theta + 0.3061) <= 5e-4,
        "vs scan": abs(sol.theta - scan) <= 2e-7,
        "NoRoot": no_root,
        "runtime": t.elapsed < 0.1,
    }
    verdict(6, checks, f"theta {sol.theta:.9f} (scan {scan:.9f}), residual "
                       f"{sol.residual:.1e}, NoRoot raised {no_root}, {t.elapsed * 1e3:.1f}ms")


def test_criterion_7_optional_stopping():
    sol = C.solve_theta(0.05, 0.03, CH)
    with Timer() as t:
        res = martingale_probe(sol, CH, 1_000_000, seed=707, episodes=100_000)
    one, stop = res.one_step, res.stopped
    verdict(7, {"one-step": one.agrees(1.0), "stopped": stop.agrees(1.0),
                "episodes": stop.samples == 100_000, "runtime": t.elapsed < 20.0},
            f"E[exp(theta*gamma+b)] = {one.mean:.5f}+-{one.std_error:.5f}, "
            f"E[Y_stop] = {stop.mean:.4f}+-{stop.std_error:.4f}, {t.elapsed:.2f}s")


@pytest.mark.slow
def test_criterion_8_closed_loop_trend():
    with Timer() as t:
        main = montecarlo_moments(SystemSpec.from_log_magnitudes([0.05, 0.03]), CH,
                                  SchedulerConfig("optimal2d", n1=10), 2000, 600, 2024)
        contrast = montecarlo_moments(SystemSpec.from_log_magnitudes([0.085, 0.001]), CH,
                                      SchedulerConfig("optimal2d", n1=2), 2000, 600, 2024)
    lm = main.log_mean_moment
    falls = lm[:, 600] < lm[:, 200]
    growth = math.exp(contrast.log_mean_moment[0, 600] - contrast.log_mean_moment[0, 200])
    checks = {
        "coord 1 falls": bool(falls[0]),
        "coord 2 falls": bool(falls[1]),
        "no divergence": main.diverged_fraction[-1] == 0.0,
        "contrast >= 10x": growth >= 10.0,
        "runtime": t.elapsed < 120.0,
    }
    verdict(8, checks, f"log mean moment t=200 {lm[0, 200]:.2f}/{lm[1, 200]:.2f}, "
                       f"t=600 {lm[0, 600]:.2f}/{lm[1, 600]:.2f}, diverged "
                       f"{main.diverged_fraction[-1]:.3f}, contrast growth x{growth:.3g}, "
                       f"{t.elapsed:.1f}s")


def test_criterion_9_codec_laws():
    ch = ChannelParams(2.0, 1.0, 0.5)
    d = ch.delta
    # exact contraction
    st = EstimatorState(0, 3.0)
    decode_update(st, 0.4, 1, ch)
    v = [st.error_var]
    for _ in range(20):
        decode_update(st, 0.1, 1, ch)
        v.append(st.error_var)
    ratio_err = max(abs(b / a - d) for a, b in zip(v, v[1:]))

    # replays of one erasure record
    m = 100_000
    rng = np.random.default_rng(909)
    x0 = rng.normal(0.0, math.sqrt(3.0), m)
    rep = EstimatorState(0, 3.0, estimate=np.zeros(m))
    for g in (0, 1, 1, 0, 1, 0, 0, 1, 1):
        s = encode(rep, x0, ch)
        decode_update(rep, g * s + rng.standard_normal(m), g, ch)
    err = rep.estimate - x0
    z_mean = abs(err.mean()) / (err.std(ddof=1) / math.sqrt(m))
    z_var = abs(err.var(ddof=1) - rep.error_var) / (rep.error_var * math.sqrt(2 / (m - 1)))

    # channel input power over encoded slots
    chan = ChannelInstance(ch, seed=919)
    prior_rng = np.random.default_rng(929)
    for _ in range(m // 10):
        xi = prior_rng.normal(0.0, 1.0)
        est = EstimatorState(0, 1.0)
        for _ in range(10):
            r, g = chan.transmit(encode(est, xi, ch))
            decode_update(est, r, g, ch)
    audit = chan.power_audit()
    power_err = abs(audit.mean_power / ch.power - 1)
    checks = {"contraction": ratio_err < 1e-15, "unbiased": z_mean < 3, "variance": z_var < 3,
              "power": power_err < 0.05 and audit.slots == m}
    verdict(9, checks, f"max |ratio - delta| {ratio_err:.1e}, |z| mean {z_mean:.2f}, "
                       f"|z| var {z_var:.2f}, power {audit.mean_power:.4f} vs P={ch.power}")


def test_criterion_10_deadbeat_gain():
    a, b = np.diag([2.0, 3.0]), np.array([1.0, 1.0])
    k = deadbeat_gain(a, b)
    closed = a + np.outer(b, k)
    # eigenvalues of the computed matrix, resolved at 50 digits
    with mpmath.workdps(50):
        eig = max(abs(e) for e in mpmath.eig(mpmath.matrix(closed.tolist()))[0])
    try:
        deadbeat_gain(a, np.array([1.0, 0.0]))
        raised = False
    except NotControllable:
        raised = True
    checks = {"K": np.allclose(k, [4.0, -9.0], rtol=0, atol=1e-12), "eig": eig < 1e-8,
              "NotControllable": raised}
    verdict(10, checks, f"K = ({k[0]:.12g}, {k[1]:.12g}), max|eig| {float(eig):.1e}, "
                        f"NotControllable raised {raised}")
