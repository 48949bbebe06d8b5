"""Scheduling and stabilizability analysis for LTI control over lossy power-limited channels."""

from .model import ChannelParams, EigenBlock, SystemSpec, delta, validate_system
from .conditions import (
    adaptive_feasible,
    equal_magnitude_condition,
    expected_round_factor,
    min_n1_for_contraction,
    necessity_holds,
    optimal2d_condition,
    oracle_allocation,
    quota_search,
    region_sweep,
    solve_theta,
    tdma_sufficient,
)
from .channel import ChannelInstance
from .codec import EstimatorState, decode_update, encode
from .sched import AdaptiveTDMA, FixedTDMA, Optimal2D
from .control import ControllerState, deadbeat_gain
from .sim import (
    SchedulerConfig,
    martingale_probe,
    montecarlo_moments,
    run_closed_loop,
    scheduler_moment_mc,
)

__version__ = "0.1.0"
