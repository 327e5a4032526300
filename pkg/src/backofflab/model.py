"""Saturation fixed point and closed-form performance metrics.

The model couples two equations: the per-attempt conditional collision
probability ``p = 1 - (1 - tau)**(N - 1)`` and the per-slot attempt
probability

    tau(p) = 2 * (1 - p**(L+1)) / sum_i [2*(1-p) + 2*mean_i] * p**i

where ``mean_i`` is the mean backoff drawn at stage ``i`` (``(W_i - 1)/2``
for a plain window, shifted up when the stage has a nonzero lower bound).
The ``tau`` normalisation above accounts for counter stalls during busy
slots, which makes it sit below the per-slot-decrement chain; pass
``normalization="per-slot"`` for the classical form (the slot-accurate
simulator's measured statistics track the per-slot form closely).

``g(p) = p - (1 - (1 - tau(p))**(N-1))`` is continuous and changes sign on
[0, 1], so the fixed point is solved by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .policies import StageWindow
from .timing import SlotDurations


class FixedPointError(RuntimeError):
    """Raised when bisection fails to reach the requested residual."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class SaturatedDelayError(ValueError):
    """Raised when p = 1 makes the expected delay diverge."""


@dataclass(frozen=True)
class FixedPointSolution:
    tau: float
    p: float
    residual: float
    iterations: int
    n_nodes: int


@dataclass(frozen=True)
class AnalyticMetrics:
    p_tr: float
    p_s: float
    throughput_norm: float
    throughput_bps: float
    p_drop: float
    e_x_slots: float
    e_b_slots: float
    e_retry: float
    e_delay_us: float


def stage_means(windows: Sequence[StageWindow]) -> list[float]:
    return [w.mean_backoff for w in windows]


def tau_of_p(p: float, windows: Sequence[StageWindow],
             normalization: str = "stalling") -> float:
    """Attempt probability implied by a collision probability ``p``.

    ``"stalling"`` weights the backoff states by the expected number of
    slots spent in them including busy-slot stalls; ``"per-slot"`` is the
    classical chain where the counter decrements every slot.
    """
    L = len(windows) - 1
    num = 2.0 * (1.0 - p ** (L + 1))
    if normalization == "stalling":
        den = sum((2.0 * (1.0 - p) + 2.0 * w.mean_backoff) * p**i
                  for i, w in enumerate(windows))
    elif normalization == "per-slot":
        den = (1.0 - p) * sum((2.0 * w.mean_backoff + 2.0) * p**i
                              for i, w in enumerate(windows))
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if den == 0.0:
        # only reachable with unit windows at p = 1; the limit is 1
        return 1.0
    # rounding can push the ratio marginally outside [0, 1] near p = 1
    return min(max(num / den, 0.0), 1.0)


def solve_fixed_point(n: int, windows: Sequence[StageWindow],
                      tolerance: float = 1e-12, max_iter: int = 200,
                      normalization: str = "stalling") -> FixedPointSolution:
    """Solve the coupled (tau, p) system by bisection on p.

    Raises ``FixedPointError`` on non-convergence and ``ValueError`` for an
    empty window sequence or ``n < 1``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not windows:
        raise ValueError("windows must be non-empty")
    for w in windows:
        if w.width < 1:
            raise ValueError(f"stage window {w} has width < 1")

    if n == 1:
        tau = tau_of_p(0.0, windows, normalization)
        return FixedPointSolution(tau=tau, p=0.0, residual=0.0,
                                  iterations=0, n_nodes=1)

    def g(p: float) -> float:
        tau = tau_of_p(p, windows, normalization)
        return p - (1.0 - (1.0 - tau) ** (n - 1))

    lo, hi = 0.0, 1.0
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tolerance:
            break
    p = 0.5 * (lo + hi)
    tau = tau_of_p(p, windows, normalization)
    residual = abs(p - (1.0 - (1.0 - tau) ** (n - 1)))
    if residual >= max(tolerance, 1e-9) and hi - lo >= tolerance:
        raise FixedPointError(f"no convergence after {it} bisection steps",
                              residual)
    return FixedPointSolution(tau=tau, p=p, residual=residual,
                              iterations=it, n_nodes=n)


def transmission_probabilities(sol: FixedPointSolution) -> tuple[float, float]:
    """(P_tr, P_s): probability a slot carries at least one transmission, and
    that such a slot is a success."""
    n, tau = sol.n_nodes, sol.tau
    p_tr = 1.0 - (1.0 - tau) ** n
    if p_tr == 0.0:
        return 0.0, 0.0
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    return p_tr, p_s


def throughput(sol: FixedPointSolution, durations: SlotDurations,
               payload_bits: float, data_rate_bps: float) -> tuple[float, float]:
    """Normalized system throughput and its bits-per-second equivalent.

    The normalisation divides the mean payload time carried per slot by the
    mean slot duration (success, collision, and idle slots weighted by their
    probabilities).
    """
    p_tr, p_s = transmission_probabilities(sol)
    if p_tr == 0.0:
        return 0.0, 0.0
    t_ep = payload_bits / data_rate_bps * 1e6
    den = (p_s * p_tr * durations.t_s_us
           + p_tr * (1.0 - p_s) * durations.t_c_us
           + (1.0 - p_tr) * durations.t_idle_us)
    s = p_s * p_tr * t_ep / den
    return s, s * data_rate_bps


def drop_probability(sol: FixedPointSolution, retry_limit: int) -> float:
    """Probability a packet exhausts all retries: p**(L+1)."""
    return sol.p ** (retry_limit + 1)


def access_delay(sol: FixedPointSolution, windows: Sequence[StageWindow],
                 durations: SlotDurations, idle_slot_us: float,
                 window_sum_delay: bool = False,
                 ) -> tuple[float, float, float, float]:
    """Expected-delay decomposition: (E[X], E[B], E[L_retry], E[D]).

    E[X] counts the backoff slots a delivered packet burns while the channel
    is idle, E[B] the slots its counter spends frozen, E[L_retry] the
    expected number of retransmissions; E[D] prices them at ``idle_slot_us``,
    the busy-slot mixture, and the collision + timeout cost respectively,
    plus one successful transmission.

    Two published conventions are provided for the backoff term. The default
    weights each stage's mean by the probability of succeeding at that stage.
    ``window_sum_delay`` charges the whole ladder sum instead and prices
    frozen slots at the mean slot duration; this variant reproduces reported
    reference delays (see the validation recipes) at the cost of
    overcounting stages a packet never reaches.
    """
    p = sol.p
    if p >= 1.0:
        raise SaturatedDelayError("expected delay diverges at p = 1")
    L = len(windows) - 1
    means = stage_means(windows)
    denom = 1.0 - p ** (L + 1)
    weights = [(p**i) * (1.0 - p) / denom for i in range(L + 1)]
    e_retry = sum(i * wi for i, wi in enumerate(weights))
    p_tr, p_s = transmission_probabilities(sol)
    if p_tr > 0.0:
        busy_us = (p_s / p_tr) * durations.t_s_us \
            + ((p_tr - p_s) / p_tr) * durations.t_c_us
    else:
        busy_us = durations.t_s_us
    if window_sum_delay:
        e_x = sum(means)
        mean_slot_us = (p_tr * p_s * durations.t_s_us
                        + p_tr * (1.0 - p_s) * durations.t_c_us
                        + (1.0 - p_tr) * durations.t_idle_us)
        frozen_charge = mean_slot_us
    else:
        e_x = sum(wi * mi for wi, mi in zip(weights, means))
        frozen_charge = busy_us
    e_b = e_x * p / (1.0 - p)
    e_d = (e_x * idle_slot_us
           + e_b * frozen_charge
           + e_retry * (durations.t_c_us + durations.t_o_us)
           + durations.t_s_us)
    return e_x, e_b, e_retry, e_d


def evaluate(n: int, windows: Sequence[StageWindow], durations: SlotDurations,
             payload_bits: float, data_rate_bps: float, retry_limit: int,
             idle_slot_us: float | None = None,
             tolerance: float = 1e-12,
             normalization: str = "stalling",
             window_sum_delay: bool = False) -> tuple[FixedPointSolution, AnalyticMetrics]:
    """Solve the fixed point and evaluate every closed-form metric.

    ``idle_slot_us`` defaults to the idle slot duration; pass the propagation
    delay instead to price counted-down slots at the alternative reading.
    """
    sol = solve_fixed_point(n, windows, tolerance, normalization=normalization)
    p_tr, p_s = transmission_probabilities(sol)
    s, bps = throughput(sol, durations, payload_bits, data_rate_bps)
    idle = durations.t_idle_us if idle_slot_us is None else idle_slot_us
    e_x, e_b, e_retry, e_d = access_delay(sol, windows, durations, idle,
                                          window_sum_delay=window_sum_delay)
    metrics = AnalyticMetrics(
        p_tr=p_tr, p_s=p_s, throughput_norm=s, throughput_bps=bps,
        p_drop=drop_probability(sol, retry_limit),
        e_x_slots=e_x, e_b_slots=e_b, e_retry=e_retry, e_delay_us=e_d,
    )
    return sol, metrics
