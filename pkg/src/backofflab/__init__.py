"""backofflab: CSMA/CA backoff analysis toolkit.

A closed-form saturation model (coupled attempt/collision fixed point plus
throughput, drop, and access-delay formulas) and a slot-accurate
discrete-event simulator for three contention-window policies: binary
exponential backoff, adaptive random backoff (running-average lower bound),
and the probabilistic window-halving variant.
"""

from .model import (AnalyticMetrics, FixedPointError, FixedPointSolution,
                    SaturatedDelayError, access_delay, drop_probability,
                    evaluate, solve_fixed_point, tau_of_p, throughput)
from .policies import (BackoffState, Policy, PolicyKind, PolicyParams,
                       StageWindow, StepResult, TxOutcome, apply_halving,
                       arb_on_collision, arb_on_success, beb_on_outcome,
                       expected_arb_lower_bound, initial_state, make_policy,
                       window_sequence)
from .rng import SplitMix64
from .simulator import (AllNodes, EventBurst, ScenarioConfig, SimMetrics,
                        compare, run, run_reference, sweep)
from .timing import (AccessMode, PhyParams, SlotDurations, compute_header_time,
                     one_mbps_params, slot_durations, table1_params)

__version__ = "0.1.0"

__all__ = [
    "AccessMode", "AllNodes", "AnalyticMetrics", "BackoffState", "EventBurst",
    "FixedPointError", "FixedPointSolution", "PhyParams", "Policy",
    "PolicyKind", "PolicyParams", "SaturatedDelayError", "ScenarioConfig",
    "SimMetrics", "SlotDurations", "SplitMix64", "StageWindow", "StepResult",
    "TxOutcome", "access_delay", "apply_halving", "arb_on_collision",
    "arb_on_success", "beb_on_outcome", "compare", "compute_header_time",
    "drop_probability", "evaluate", "expected_arb_lower_bound",
    "initial_state", "make_policy", "one_mbps_params", "run", "run_reference",
    "slot_durations", "solve_fixed_point", "sweep", "table1_params",
    "tau_of_p", "throughput", "window_sequence",
]
