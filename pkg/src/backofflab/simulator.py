"""Slot-accurate simulation of N saturated nodes on one collision channel.

Semantics: every active node always has a packet (saturation). Nodes count
down their backoff during idle slots; any node whose counter reaches zero
transmits at the next slot boundary. A lone transmitter occupies the channel
for T_s and its policy sees a success; two or more transmitters collide,
occupy the channel for T_c, and each collider additionally waits T_o before
its countdown resumes. Counters freeze while the channel is busy. One
"round" is a single idle slot or a single busy period; metrics accumulate
once ``warmup_slots`` rounds have elapsed. ``measured_p`` is the per-attempt
collision frequency; ``measured_tau`` is attempts per node per idle slot
(counters only advance during idle slots, so idle slots are the
countdown-eligible ones).

``run`` dispatches to a compiled kernel; ``run_reference`` is a plain-Python
loop with identical semantics and an identical draw stream, kept as a
differential oracle and for instrumented tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import _kernel
from .policies import (BackoffState, Policy, PolicyKind, PolicyParams,
                       TxOutcome, make_policy)
from .rng import SplitMix64
from .timing import AccessMode, PhyParams, slot_durations

DELAY_SAMPLE_CAP = 1_000_000


@dataclass(frozen=True)
class AllNodes:
    pass


@dataclass(frozen=True)
class EventBurst:
    """Only ``count`` nodes contend, activating together at a given round."""

    count: int
    activation_slot: int = 0


ActiveSet = Union[AllNodes, EventBurst]


@dataclass(frozen=True)
class ScenarioConfig:
    n_nodes: int
    policy_name: str = "beb"
    policy: PolicyParams = field(default_factory=PolicyParams)
    phy: PhyParams = field(default_factory=PhyParams)
    mode: AccessMode = AccessMode.BASIC
    active: ActiveSet = field(default_factory=AllNodes)
    seed: int = 1
    horizon_slots: int | None = 200_000
    horizon_us: float | None = None
    warmup_slots: int = 20_000

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if isinstance(self.active, EventBurst):
            if not 1 <= self.active.count <= self.n_nodes:
                raise ValueError("EventBurst count must lie in [1, n_nodes]")
            if self.active.activation_slot < 0:
                raise ValueError("activation_slot must be >= 0")
        if self.horizon_slots is None and self.horizon_us is None:
            raise ValueError("one of horizon_slots / horizon_us is required")
        if self.horizon_slots is not None and self.horizon_slots <= self.warmup_slots:
            raise ValueError("horizon_slots must exceed warmup_slots")
        if self.warmup_slots < 0:
            raise ValueError("warmup_slots must be >= 0")
        self.make_policy()  # validates the policy name

    def make_policy(self) -> Policy:
        return make_policy(self.policy_name, self.policy)

    @property
    def active_count(self) -> int:
        return self.active.count if isinstance(self.active, EventBurst) else self.n_nodes

    @property
    def activation_round(self) -> int:
        return self.active.activation_slot if isinstance(self.active, EventBurst) else 0


@dataclass(frozen=True)
class SimMetrics:
    delivered_packets: int
    collided_tx: int
    dropped_packets: int
    attempts: int
    busy_time_us: float
    idle_time_us: float
    elapsed_us: float
    rounds: int
    rounds_measured: int
    busy_rounds: int
    payload_bits_delivered: int
    throughput_bps: float
    throughput_norm: float
    mean_access_delay_us: float
    access_delay_samples: np.ndarray
    measured_p: float
    measured_tau: float
    zero_delivery: bool

    CSV_FIELDS = ("delivered_packets", "collided_tx", "dropped_packets",
                  "attempts", "busy_time_us", "idle_time_us", "elapsed_us",
                  "rounds", "rounds_measured", "busy_rounds",
                  "payload_bits_delivered", "throughput_bps",
                  "throughput_norm", "mean_access_delay_us", "measured_p",
                  "measured_tau", "zero_delivery")


def _metrics_from_counts(config: ScenarioConfig, delivered, collided, dropped,
                         attempts, busy_ns, idle_ns, elapsed_ns, rounds,
                         rounds_warm, busy_rounds_warm, delay_sum, delay_seen,
                         samples) -> SimMetrics:
    payload_bits = delivered * config.phy.payload_bits
    elapsed_us = elapsed_ns / 1000.0
    if elapsed_ns > 0:
        payload_time_us = delivered * config.phy.payload_time_us
        norm = payload_time_us / elapsed_us
        bps = payload_bits / (elapsed_ns / 1e9)
    else:
        norm = 0.0
        bps = 0.0
    n_active = config.active_count
    idle_rounds = rounds_warm - busy_rounds_warm
    return SimMetrics(
        delivered_packets=int(delivered),
        collided_tx=int(collided),
        dropped_packets=int(dropped),
        attempts=int(attempts),
        busy_time_us=busy_ns / 1000.0,
        idle_time_us=idle_ns / 1000.0,
        elapsed_us=elapsed_us,
        rounds=int(rounds),
        rounds_measured=int(rounds_warm),
        busy_rounds=int(busy_rounds_warm),
        payload_bits_delivered=int(payload_bits),
        throughput_bps=bps,
        throughput_norm=norm,
        mean_access_delay_us=(delay_sum / delay_seen) if delay_seen else math.nan,
        access_delay_samples=np.asarray(samples, dtype=np.float64),
        measured_p=(collided / attempts) if attempts else math.nan,
        measured_tau=(attempts / (n_active * idle_rounds)) if idle_rounds else math.nan,
        zero_delivery=bool(delivered == 0),
    )


def _kernel_args(config: ScenarioConfig):
    p = config.policy
    d = slot_durations(config.phy, config.mode)
    ns = lambda us: int(round(us * 1000.0))
    kind = PolicyKind(config.policy_name)
    horizon_rounds = config.horizon_slots if config.horizon_slots is not None \
        else (1 << 62)
    horizon_ns = ns(config.horizon_us) if config.horizon_us is not None \
        else (1 << 62)
    return dict(
        active_count=config.active_count,
        activation_round=config.activation_round,
        policy_kind=_kernel.POLICY_BEB if kind is PolicyKind.BEB else _kernel.POLICY_ARB,
        halving_enabled=kind is PolicyKind.ARB_HALVING,
        cw_min=p.cw_min, cw_max=p.cw_max, stage_cap=min(p.stage_cap, 1 << 30),
        retry_limit=p.retry_limit, sigma=p.sigma,
        t_cw=p.t_cw, cw_th=p.effective_cw_th, alpha=p.alpha,
        f_halving=p.halving_prob_f,
        grow_from_cw_min=p.grow_from_cw_min, avg_on_collision=p.avg_on_collision,
        slot_ns=ns(d.t_idle_us), ts_ns=ns(d.t_s_us), tc_ns=ns(d.t_c_us),
        to_ns=ns(d.t_o_us),
        horizon_rounds=horizon_rounds, horizon_ns=horizon_ns,
        warmup_rounds=config.warmup_slots,
        seed=np.uint64(config.seed & ((1 << 64) - 1)),
        sample_cap=DELAY_SAMPLE_CAP,
    )


def run(config: ScenarioConfig) -> SimMetrics:
    """Run one scenario on the compiled kernel."""
    a = _kernel_args(config)
    (delivered, collided, dropped, attempts, busy_ns, idle_ns, elapsed_ns,
     rounds, rounds_warm, busy_rounds_warm, _started, delay_sum, delay_seen,
     samples) = _kernel.run_kernel(**a)
    return _metrics_from_counts(config, delivered, collided, dropped, attempts,
                                busy_ns, idle_ns, elapsed_ns, rounds,
                                rounds_warm, busy_rounds_warm, delay_sum,
                                delay_seen, samples)


@dataclass
class _RefStats:
    """Extra bookkeeping exposed by the reference loop for invariant tests."""

    packets_started: int = 0
    busy_periods: int = 0
    collision_events: list = field(default_factory=list)
    pending: int = 0


def run_reference(config: ScenarioConfig, stats: _RefStats | None = None) -> SimMetrics:
    """Pure-Python slot-by-slot loop; draw-stream-identical to ``run``."""
    policy = config.make_policy()
    d = slot_durations(config.phy, config.mode)
    slot_ns = int(round(d.t_idle_us * 1000.0))
    ts_ns = int(round(d.t_s_us * 1000.0))
    tc_ns = int(round(d.t_c_us * 1000.0))
    to_ns = int(round(d.t_o_us * 1000.0))
    horizon_rounds = config.horizon_slots if config.horizon_slots is not None \
        else (1 << 62)
    horizon_ns = int(round(config.horizon_us * 1000.0)) \
        if config.horizon_us is not None else (1 << 62)
    warmup = config.warmup_slots
    activation = config.activation_round
    n_active = config.active_count

    rng = SplitMix64(config.seed & ((1 << 64) - 1))
    states: list[BackoffState] = [policy.initial(rng) for _ in range(n_active)]
    frozen = [0] * n_active
    pstart = [0] * n_active

    t = 0
    rounds = 0
    warm = warmup == 0
    t_warm = 0
    idle_ns = busy_ns = 0
    attempts = collided = delivered = dropped = 0
    rounds_warm = 0
    busy_rounds_warm = 0
    delay_sum = 0.0
    delay_seen = 0
    samples: list[float] = []
    if stats is not None:
        stats.packets_started = n_active

    while rounds < horizon_rounds and t < horizon_ns:
        if not warm and rounds >= warmup:
            warm = True
            t_warm = t
        if rounds < activation:
            rounds += 1
            t += slot_ns
            if warm:
                idle_ns += slot_ns
                rounds_warm += 1
            if rounds == activation:
                for i in range(n_active):
                    pstart[i] = t
            continue

        txs = [i for i in range(n_active)
               if frozen[i] <= t and states[i].counter == 0]
        if not txs:
            rounds += 1
            t += slot_ns
            if warm:
                idle_ns += slot_ns
                rounds_warm += 1
            for i in range(n_active):
                if frozen[i] <= t - slot_ns:
                    states[i] = replace(states[i], counter=states[i].counter - 1)
            continue

        warm_busy = rounds >= warmup
        rounds += 1
        success = len(txs) == 1
        dur = ts_ns if success else tc_ns
        t_end = t + dur
        if warm_busy:
            rounds_warm += 1
            busy_rounds_warm += 1
            busy_ns += dur
            attempts += len(txs)
            if not success:
                collided += len(txs)
        if stats is not None:
            stats.busy_periods += 1
            if not success:
                stats.collision_events.append(len(txs))

        for i in txs:
            if success:
                if warm_busy:
                    delivered += 1
                    d_us = (t_end - pstart[i]) / 1000.0
                    delay_sum += d_us
                    delay_seen += 1
                    if len(samples) < DELAY_SAMPLE_CAP:
                        samples.append(d_us)
                    else:
                        r = rng.randbelow(delay_seen)
                        if r < DELAY_SAMPLE_CAP:
                            samples[r] = d_us
                pstart[i] = t_end
                if stats is not None:
                    stats.packets_started += 1
                states[i], _ = policy.on_outcome(states[i], TxOutcome.SUCCESS, rng)
                frozen[i] = t_end
            else:
                states[i], was_dropped = policy.on_outcome(
                    states[i], TxOutcome.COLLISION, rng)
                if was_dropped:
                    if warm_busy:
                        dropped += 1
                    pstart[i] = t_end
                    if stats is not None:
                        stats.packets_started += 1
                frozen[i] = t_end + to_ns
        t = t_end

    if not warm and rounds >= warmup:
        warm = True
        t_warm = t
    elapsed_ns = t - t_warm if warm else 0
    if stats is not None:
        stats.pending = n_active
    return _metrics_from_counts(config, delivered, collided, dropped, attempts,
                                busy_ns, idle_ns, elapsed_ns, rounds,
                                rounds_warm, busy_rounds_warm, delay_sum,
                                delay_seen, samples)


def sweep(configs: list[ScenarioConfig], use_reference: bool = False
          ) -> list[tuple[int, SimMetrics]]:
    """Run scenarios independently; output order matches input order."""
    if not configs:
        raise ValueError("sweep requires at least one scenario")
    runner = run_reference if use_reference else run
    return [(idx, runner(c)) for idx, c in enumerate(configs)]


#: metric pairs compared by :func:`compare`. Each entry maps a metric name to
#: (sim extractor, analytic extractor).
COMPARED_METRICS = {
    "throughput_bps": (lambda s: s.throughput_bps, lambda a: a.throughput_bps),
    "throughput_norm": (lambda s: s.throughput_norm, lambda a: a.throughput_norm),
    "access_delay_us": (lambda s: s.mean_access_delay_us, lambda a: a.e_delay_us),
    "p_drop": (lambda s: (s.dropped_packets
                          / (s.delivered_packets + s.dropped_packets)
                          if s.delivered_packets + s.dropped_packets else math.nan),
               lambda a: a.p_drop),
}


def compare(sim: SimMetrics, analytic, extra_sim: dict | None = None,
            extra_analytic: dict | None = None) -> dict[str, tuple[float, float, float | None]]:
    """Signed relative error of simulated metrics against analytic ones.

    Returns ``{metric: (sim_value, analytic_value, rel_error)}`` with
    ``rel_error = (sim - analytic) / analytic``, ``None`` when the analytic
    value is zero. ``extra_sim``/``extra_analytic`` add ad-hoc pairs (such as
    measured vs solved p) keyed by metric name.
    """
    report: dict[str, tuple[float, float, float | None]] = {}
    pairs = {name: (f(sim), g(analytic)) for name, (f, g) in COMPARED_METRICS.items()}
    for name in (extra_sim or {}):
        pairs[name] = (extra_sim[name], (extra_analytic or {}).get(name, math.nan))
    for name, (sv, av) in pairs.items():
        rel = (sv - av) / av if av not in (0, 0.0) and not math.isnan(av) else None
        report[name] = (sv, av, rel)
    return report
