"""Compiled hot loop for the channel simulator.

Re-implements the splitmix64 stream and the policy transitions from
``policies.py`` so the pure-Python reference loop and this kernel consume
identical draw sequences; ``tests/test_simulator.py`` asserts equality of
the two paths. Draw order per transmitter: reservoir draw (delivery beyond
the sample cap) -> halving coin (ARB halving success) -> counter draw.

All virtual time is integer nanoseconds. A "round" is one idle backoff slot
or one busy period; metrics accumulate from round ``warmup_rounds`` on.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SEED_TWEAK = np.uint64(0x5DEECE66D)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53

POLICY_BEB = 0
POLICY_ARB = 1


@njit(cache=True, inline="always")
def _next_u64(state):
    state = (state + _GAMMA) & U64_MASK
    z = state
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & U64_MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & U64_MASK
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _randbelow(state, span):
    span64 = np.uint64(span)
    limit = (U64_MASK // span64) * span64
    while True:
        state, z = _next_u64(state)
        if z < limit:
            return state, np.int64(z % span64)


@njit(cache=True, inline="always")
def _coin(state):
    state, z = _next_u64(state)
    return state, np.float64(z >> np.uint64(11)) * _DOUBLE_SCALE


@njit(cache=True, inline="always")
def _advance_idle(k, rounds, t, warm, t_warm, idle_ns, rounds_warm,
                  warmup_rounds, slot_ns):
    # split the jump at the warmup boundary so accounting starts exactly there
    if not warm and rounds + k > warmup_rounds:
        pre = warmup_rounds - rounds
        rounds += pre
        t += pre * slot_ns
        warm = True
        t_warm = t
        k -= pre
    rounds += k
    t += k * slot_ns
    if warm:
        idle_ns += k * slot_ns
        rounds_warm += k
    elif rounds >= warmup_rounds:
        warm = True
        t_warm = t
    return rounds, t, warm, t_warm, idle_ns, rounds_warm


@njit(cache=True)
def run_kernel(
    active_count,
    activation_round,
    policy_kind,
    halving_enabled,
    cw_min, cw_max, stage_cap, retry_limit, sigma,
    t_cw, cw_th, alpha, f_halving,
    grow_from_cw_min, avg_on_collision,
    slot_ns, ts_ns, tc_ns, to_ns,
    horizon_rounds, horizon_ns, warmup_rounds,
    seed, sample_cap,
):
    state = np.uint64(seed) ^ _SEED_TWEAK

    counters = np.zeros(active_count, np.int64)
    stages = np.zeros(active_count, np.int64)
    uppers = np.zeros(active_count, np.int64)
    lowers = np.zeros(active_count, np.int64)
    avgs = np.zeros(active_count, np.float64)
    lasts = np.zeros(active_count, np.int64)
    frozen = np.zeros(active_count, np.int64)
    pstart = np.zeros(active_count, np.int64)
    txs = np.zeros(active_count, np.int64)

    w0 = cw_min if policy_kind == POLICY_BEB else t_cw
    for i in range(active_count):
        uppers[i] = w0
        if policy_kind == POLICY_ARB:
            avgs[i] = 2.0
        state, d = _randbelow(state, w0)
        counters[i] = d
        lasts[i] = d

    t = np.int64(0)
    rounds = np.int64(0)
    warm = warmup_rounds == 0
    t_warm = np.int64(0)
    idle_ns = np.int64(0)
    busy_ns = np.int64(0)
    attempts = np.int64(0)
    collided = np.int64(0)
    delivered = np.int64(0)
    dropped = np.int64(0)
    rounds_warm = np.int64(0)
    busy_rounds_warm = np.int64(0)
    packets_started = np.int64(active_count)
    delay_sum = 0.0
    delay_seen = np.int64(0)
    samples = np.empty(sample_cap, np.float64)
    n_samples = np.int64(0)

    while rounds < horizon_rounds and t < horizon_ns:
        s_time = (horizon_ns - t + slot_ns - 1) // slot_ns
        s_stop = horizon_rounds - rounds
        if s_time < s_stop:
            s_stop = s_time

        if rounds < activation_round:
            step = activation_round - rounds
            if step >= s_stop:
                rounds, t, warm, t_warm, idle_ns, rounds_warm = _advance_idle(
                    s_stop, rounds, t, warm, t_warm, idle_ns, rounds_warm,
                    warmup_rounds, slot_ns)
                break
            rounds, t, warm, t_warm, idle_ns, rounds_warm = _advance_idle(
                step, rounds, t, warm, t_warm, idle_ns, rounds_warm,
                warmup_rounds, slot_ns)
            for i in range(active_count):
                pstart[i] = t
            continue

        # offset in idle slots until the next transmission
        s = np.int64(-1)
        for i in range(active_count):
            e = np.int64(0)
            if frozen[i] > t:
                e = (frozen[i] - t + slot_ns - 1) // slot_ns
            c = e + counters[i]
            if s < 0 or c < s:
                s = c

        if s >= s_stop:
            rounds, t, warm, t_warm, idle_ns, rounds_warm = _advance_idle(
                s_stop, rounds, t, warm, t_warm, idle_ns, rounds_warm,
                warmup_rounds, slot_ns)
            break

        n_tx = np.int64(0)
        for i in range(active_count):
            e = np.int64(0)
            if frozen[i] > t:
                e = (frozen[i] - t + slot_ns - 1) // slot_ns
            c = e + counters[i]
            if c == s:
                txs[n_tx] = i
                n_tx += 1
            else:
                d = s - e
                if d > 0:
                    counters[i] -= d

        rounds, t, warm, t_warm, idle_ns, rounds_warm = _advance_idle(
            s, rounds, t, warm, t_warm, idle_ns, rounds_warm,
            warmup_rounds, slot_ns)

        # busy round
        warm_busy = rounds >= warmup_rounds
        rounds += 1
        success = n_tx == 1
        dur = ts_ns if success else tc_ns
        t_end = t + dur
        if warm_busy:
            rounds_warm += 1
            busy_rounds_warm += 1
            busy_ns += dur
            attempts += n_tx
            if not success:
                collided += n_tx

        for j in range(n_tx):
            i = txs[j]
            if success:
                if warm_busy:
                    delivered += 1
                    d_us = (t_end - pstart[i]) / 1000.0
                    delay_sum += d_us
                    delay_seen += 1
                    if n_samples < sample_cap:
                        samples[n_samples] = d_us
                        n_samples += 1
                    else:
                        state, r = _randbelow(state, delay_seen)
                        if r < sample_cap:
                            samples[r] = d_us
                pstart[i] = t_end
                packets_started += 1
                stages[i] = 0
                if policy_kind == POLICY_BEB:
                    uppers[i] = cw_min
                    lowers[i] = 0
                else:
                    cw = lasts[i]
                    lb = lowers[i]
                    if not avg_on_collision:
                        if 0 < cw < cw_th:
                            avgs[i] = 2.0 * cw + avgs[i]
                        else:
                            avgs[i] = 0.0
                        if cw == 0:
                            lb = np.int64(1)
                        elif cw >= cw_th:
                            lb = np.int64(0)
                        else:
                            lb = np.int64(np.floor(alpha * avgs[i] + 0.5))
                    if halving_enabled:
                        state, u = _coin(state)
                        if u < f_halving:
                            h = uppers[i] // 2
                            uppers[i] = h if h > t_cw else t_cw
                    else:
                        uppers[i] = t_cw
                    if lb < 0:
                        lb = np.int64(0)
                    if lb > uppers[i] - 1:
                        lb = uppers[i] - 1
                    lowers[i] = lb
                frozen[i] = t_end
            else:
                stages[i] += 1
                if policy_kind == POLICY_ARB and avg_on_collision:
                    cw = lasts[i]
                    if 0 < cw < cw_th:
                        avgs[i] = 2.0 * cw + avgs[i]
                    else:
                        avgs[i] = 0.0
                    if cw == 0:
                        lowers[i] = 1
                    elif cw >= cw_th:
                        lowers[i] = 0
                    else:
                        lowers[i] = np.int64(np.floor(alpha * avgs[i] + 0.5))
                if stages[i] > retry_limit:
                    if warm_busy:
                        dropped += 1
                    pstart[i] = t_end
                    packets_started += 1
                    stages[i] = 0
                    lowers[i] = 0
                    uppers[i] = cw_min if policy_kind == POLICY_BEB else t_cw
                else:
                    if policy_kind == POLICY_BEB:
                        st = stages[i] if stages[i] < stage_cap else stage_cap
                        u2 = np.int64(cw_min)
                        for _ in range(st):
                            u2 *= sigma
                            if u2 >= cw_max:
                                u2 = cw_max
                                break
                        uppers[i] = u2
                    elif grow_from_cw_min:
                        u2 = np.int64(cw_min)
                        for _ in range(stages[i]):
                            u2 *= sigma
                            if u2 >= cw_max:
                                u2 = cw_max
                                break
                        uppers[i] = u2
                    else:
                        u2 = uppers[i] * sigma
                        uppers[i] = u2 if u2 < cw_max else cw_max
                    if lowers[i] > uppers[i] - 1:
                        lowers[i] = uppers[i] - 1
                frozen[i] = t_end + to_ns
            lo = lowers[i] - 1
            if lo < 0:
                lo = np.int64(0)
            state, d = _randbelow(state, uppers[i] - lo)
            counters[i] = lo + d
            lasts[i] = lo + d
        t = t_end

    elapsed_ns = t - t_warm if warm else np.int64(0)
    return (delivered, collided, dropped, attempts, busy_ns, idle_ns,
            elapsed_ns, rounds, rounds_warm, busy_rounds_warm,
            packets_started, delay_sum, delay_seen, samples[:n_samples])
