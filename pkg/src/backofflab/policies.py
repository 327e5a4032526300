"""Per-node contention-window state machines.

Three policies share one interface:

* ``beb`` — classic binary exponential backoff: the window doubles on every
  collision up to ``cw_max`` and resets to ``cw_min`` on success.
* ``arb`` — adaptive random backoff: tracks a weighted running average of
  recent successful draws and raises the lower bound of the next draw range
  to ``alpha`` times that average; the upper bound resets to ``t_cw`` after
  a success and doubles on collisions.
* ``arb-halving`` — same as ``arb`` except that after a success the upper
  bound is halved with probability ``halving_prob_f`` (floored at ``t_cw``)
  instead of being reset outright.

Transitions are pure functions from (state, params, rng) to a new state plus
a drop flag; the rng only needs ``randrange``/``random`` (``random.Random``
and :class:`backofflab.rng.SplitMix64` both qualify).

Draw-order contract (relied on by the compiled simulator kernel, which
replays the same stream): on an ARB success the halving coin, when enabled,
is consumed before the counter draw; every transition consumes exactly one
counter draw.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple


class TxOutcome(enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"


class PolicyKind(enum.Enum):
    BEB = "beb"
    ARB = "arb"
    ARB_HALVING = "arb-halving"


@dataclass(frozen=True)
class PolicyParams:
    """Knobs shared by all policies.

    ``backoff_order_m`` caps exponential growth at stage ``m`` (window frozen
    beyond it); ``None`` means growth is limited only by ``cw_max``.
    ``cw_th`` defaults to ``t_cw // 2`` and ``alpha`` to 0.5.
    ``grow_from_cw_min`` makes ARB collisions grow the window from
    ``cw_min * sigma**failures`` instead of doubling the live window.
    ``avg_on_collision`` moves the running-average update from the success
    path to the collision path.
    """

    cw_min: int = 32
    cw_max: int = 1024
    backoff_order_m: int | None = None
    retry_limit: int = 4
    sigma: int = 2
    t_cw: int = 16
    cw_th: int | None = None
    alpha: float = 0.5
    halving_prob_f: float = 1.0
    grow_from_cw_min: bool = False
    avg_on_collision: bool = False

    def __post_init__(self):
        if not (1 <= self.cw_min <= self.cw_max):
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.t_cw < 1:
            raise ValueError("t_cw must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.sigma < 2:
            raise ValueError("sigma must be >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.halving_prob_f <= 1.0:
            raise ValueError("halving_prob_f must lie in [0, 1]")
        if self.backoff_order_m is not None and self.backoff_order_m < 0:
            raise ValueError("backoff_order_m must be >= 0 when given")
        th = self.effective_cw_th
        if th < 0 or th > self.cw_min:
            raise ValueError("cw_th must lie in [0, cw_min]")

    @property
    def effective_cw_th(self) -> int:
        return self.cw_th if self.cw_th is not None else self.t_cw // 2

    @property
    def stage_cap(self) -> int:
        return self.backoff_order_m if self.backoff_order_m is not None else 1 << 30


@dataclass(frozen=True)
class BackoffState:
    """Snapshot of one node's backoff machine.

    ``counter`` is the remaining backoff; the node transmits when it hits
    zero. ``cw_lower``/``cw_upper`` bound the most recent draw range and
    ``last_draw`` records the drawn value (consumed by the ARB success rule).
    """

    stage_i: int = 0
    cw_lower: int = 0
    cw_upper: int = 1
    cw_avg: float = 0.0
    last_draw: int = 0
    counter: int = 0


class StepResult(NamedTuple):
    state: BackoffState
    dropped: bool


def _draw(lower: int, upper: int, rng) -> int:
    # draw range is [max(lower - 1, 0), upper - 1], never empty
    lo = max(lower - 1, 0)
    return rng.randrange(lo, upper)


def _beb_window(stage: int, params: PolicyParams) -> int:
    w = params.cw_min * params.sigma ** min(stage, params.stage_cap)
    return min(w, params.cw_max)


def initial_state(params: PolicyParams, kind: PolicyKind, rng) -> BackoffState:
    """Fresh machine at stage 0 with a counter drawn from the initial window.

    ARB's running average starts at 2.
    """
    if kind is PolicyKind.BEB:
        upper, avg = params.cw_min, 0.0
    else:
        upper, avg = params.t_cw, 2.0
    c = _draw(0, upper, rng)
    return BackoffState(stage_i=0, cw_lower=0, cw_upper=upper,
                        cw_avg=avg, last_draw=c, counter=c)


def beb_on_outcome(state: BackoffState, params: PolicyParams,
                   outcome: TxOutcome, rng) -> StepResult:
    """Advance a BEB machine past a transmission attempt.

    Collision doubles the window (capped at stage ``m`` and at ``cw_max``);
    success resets it to ``cw_min``. Exceeding the retry limit drops the
    packet and resets as for success.
    """
    dropped = False
    if outcome is TxOutcome.COLLISION:
        stage = state.stage_i + 1
        if stage > params.retry_limit:
            dropped = True
            stage, upper = 0, params.cw_min
        else:
            upper = _beb_window(stage, params)
    else:
        stage, upper = 0, params.cw_min
    c = _draw(0, upper, rng)
    return StepResult(
        BackoffState(stage_i=stage, cw_lower=0, cw_upper=upper,
                     cw_avg=state.cw_avg, last_draw=c, counter=c),
        dropped,
    )


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def apply_halving(current_upper: int, params: PolicyParams, rng) -> int:
    """With probability ``halving_prob_f`` halve the window (floored at
    ``t_cw``); otherwise leave it unchanged. Consumes one uniform draw."""
    if rng.random() < params.halving_prob_f:
        return max(current_upper // 2, params.t_cw)
    return current_upper


def _arb_update_avg(avg: float, last_draw: int, params: PolicyParams) -> float:
    if 0 < last_draw < params.effective_cw_th:
        return 2.0 * last_draw + avg
    return 0.0


def _arb_lower(avg: float, last_draw: int, params: PolicyParams) -> int:
    if last_draw == 0:
        return 1
    if last_draw >= params.effective_cw_th:
        return 0
    return round_half_up(params.alpha * avg)


def arb_on_success(state: BackoffState, params: PolicyParams, rng,
                   halving: bool = False) -> StepResult:
    """Advance an ARB machine past a successful transmission.

    The running average accumulates ``2 * last_draw`` while draws stay inside
    (0, cw_th) and collapses to zero otherwise; the new lower bound is
    ``alpha`` times the average (1 after a zero draw). The upper bound
    resets to ``t_cw``, or is halved in place when ``halving`` is set.
    """
    avg = state.cw_avg
    lower = state.cw_lower
    if not params.avg_on_collision:
        avg = _arb_update_avg(state.cw_avg, state.last_draw, params)
        lower = _arb_lower(avg, state.last_draw, params)
    if halving:
        upper = apply_halving(state.cw_upper, params, rng)
    else:
        upper = params.t_cw
    lower = min(max(lower, 0), upper - 1)
    c = _draw(lower, upper, rng)
    return StepResult(
        BackoffState(stage_i=0, cw_lower=lower, cw_upper=upper,
                     cw_avg=avg, last_draw=c, counter=c),
        False,
    )


def arb_on_collision(state: BackoffState, params: PolicyParams, rng) -> StepResult:
    """Advance an ARB machine past a collision.

    The window doubles (from the live upper bound, or from
    ``cw_min * sigma**failures`` under ``grow_from_cw_min``), capped at
    ``cw_max``. Exceeding the retry limit drops the packet and resets to the
    initial window with the running average preserved and the lower bound
    cleared.
    """
    dropped = False
    stage = state.stage_i + 1
    avg = state.cw_avg
    lower = state.cw_lower
    if params.avg_on_collision:
        avg = _arb_update_avg(state.cw_avg, state.last_draw, params)
        lower = _arb_lower(avg, state.last_draw, params)
    if stage > params.retry_limit:
        dropped = True
        stage, upper, lower = 0, params.t_cw, 0
    elif params.grow_from_cw_min:
        upper = min(params.cw_min * params.sigma ** stage, params.cw_max)
    else:
        upper = min(state.cw_upper * params.sigma, params.cw_max)
    lower = min(max(lower, 0), upper - 1)
    c = _draw(lower, upper, rng)
    return StepResult(
        BackoffState(stage_i=stage, cw_lower=lower, cw_upper=upper,
                     cw_avg=avg, last_draw=c, counter=c),
        dropped,
    )


@dataclass(frozen=True)
class StageWindow:
    lower: int
    upper: int

    @property
    def mean_backoff(self) -> float:
        return (max(self.lower - 1, 0) + self.upper - 1) / 2.0

    @property
    def width(self) -> int:
        return self.upper - max(self.lower - 1, 0)


def expected_arb_lower_bound(params: PolicyParams, max_iter: int = 500) -> int:
    """Steady-state expected lower bound of ARB under success-only operation.

    Solves the closed recursion for the running average: the average next
    packet inherits is ``(2 * draw + avg)`` whenever the draw lands strictly
    inside (0, cw_th), else zero. Iterates the induced fixed point over the
    integer draw distribution until the rounded bound stabilises.
    """
    th = params.effective_cw_th
    upper = params.t_cw
    avg, lower = 2.0, 0
    for _ in range(max_iter):
        lo = max(lower - 1, 0)
        span = upper - lo
        inside = [v for v in range(lo, upper) if 0 < v < th]
        q = len(inside) / span
        if q >= 1.0:
            # every draw feeds the average: the bound pins at the window top
            return upper - 1
        mean_inside = sum(inside) / span
        new_avg = 2.0 * mean_inside / (1.0 - q)
        new_lower = min(round_half_up(params.alpha * new_avg), upper - 1)
        if new_lower == lower and abs(new_avg - avg) < 1e-12:
            break
        avg, lower = new_avg, new_lower
    return lower


def window_sequence(params: PolicyParams, kind: PolicyKind) -> list[StageWindow]:
    """Per-stage draw windows for stages 0..retry_limit, as consumed by the
    analytic model.

    BEB stages span [0, cw_min * sigma**i] capped at stage ``m`` and at
    ``cw_max``; ARB stages span the ``t_cw`` ladder with the steady-state
    expected lower bound applied to every stage.
    """
    L = params.retry_limit
    if kind is PolicyKind.BEB:
        return [StageWindow(0, _beb_window(i, params)) for i in range(L + 1)]
    lb = expected_arb_lower_bound(params)
    windows = []
    for i in range(L + 1):
        base = params.cw_min if params.grow_from_cw_min and i > 0 else params.t_cw
        upper = min(base * params.sigma ** i, params.cw_max)
        windows.append(StageWindow(min(lb, upper - 1), upper))
    return windows


class Policy:
    """Name-dispatched wrapper bundling params with the transition functions."""

    def __init__(self, kind: PolicyKind | str, params: PolicyParams):
        self.kind = PolicyKind(kind) if isinstance(kind, str) else kind
        self.params = params

    def initial(self, rng) -> BackoffState:
        return initial_state(self.params, self.kind, rng)

    def on_outcome(self, state: BackoffState, outcome: TxOutcome, rng) -> StepResult:
        if self.kind is PolicyKind.BEB:
            return beb_on_outcome(state, self.params, outcome, rng)
        if outcome is TxOutcome.SUCCESS:
            halving = self.kind is PolicyKind.ARB_HALVING
            return arb_on_success(state, self.params, rng, halving=halving)
        return arb_on_collision(state, self.params, rng)

    def windows(self) -> list[StageWindow]:
        kind = PolicyKind.BEB if self.kind is PolicyKind.BEB else PolicyKind.ARB
        return window_sequence(self.params, kind)


def make_policy(name: str, params: PolicyParams | None = None, **overrides) -> Policy:
    """Build a policy from its config name: "beb", "arb", or "arb-halving"."""
    base = params if params is not None else PolicyParams()
    if overrides:
        base = replace(base, **overrides)
    return Policy(PolicyKind(name), base)
