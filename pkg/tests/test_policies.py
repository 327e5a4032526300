import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backofflab.policies import (BackoffState, PolicyKind, PolicyParams,
                                 TxOutcome, apply_halving, arb_on_collision,
                                 arb_on_success, beb_on_outcome,
                                 expected_arb_lower_bound, initial_state,
                                 make_policy, window_sequence)
from backofflab.rng import SplitMix64


def beb_state(upper, stage=0, counter=0):
    return BackoffState(stage_i=stage, cw_lower=0, cw_upper=upper,
                        cw_avg=0.0, last_draw=counter, counter=counter)


class TestBeb:
    def test_collision_doubles_window(self):
        s, dropped = beb_on_outcome(beb_state(32), PolicyParams(),
                                    TxOutcome.COLLISION, SplitMix64(1))
        assert s.cw_upper == 64 and s.stage_i == 1 and not dropped

    def test_collision_caps_at_cw_max(self):
        s, _ = beb_on_outcome(beb_state(1024, stage=5), PolicyParams(retry_limit=9),
                              TxOutcome.COLLISION, SplitMix64(1))
        assert s.cw_upper == 1024

    def test_success_resets_to_cw_min(self):
        s, dropped = beb_on_outcome(beb_state(512, stage=4), PolicyParams(),
                                    TxOutcome.SUCCESS, SplitMix64(1))
        assert s.cw_upper == 32 and s.stage_i == 0 and not dropped

    def test_drop_after_retry_limit(self):
        params = PolicyParams(retry_limit=2)
        s = beb_state(128, stage=2)
        s2, dropped = beb_on_outcome(s, params, TxOutcome.COLLISION, SplitMix64(1))
        assert dropped
        assert s2.stage_i == 0 and s2.cw_upper == params.cw_min

    def test_stage_cap_freezes_window(self):
        params = PolicyParams(backoff_order_m=2, retry_limit=6)
        s = beb_state(128, stage=2)
        s2, _ = beb_on_outcome(s, params, TxOutcome.COLLISION, SplitMix64(1))
        assert s2.stage_i == 3 and s2.cw_upper == 128  # frozen at 2**2 * 32

    def test_lower_bound_always_zero(self):
        rng = SplitMix64(3)
        s = initial_state(PolicyParams(), PolicyKind.BEB, rng)
        for outcome in (TxOutcome.COLLISION, TxOutcome.SUCCESS) * 20:
            s, _ = beb_on_outcome(s, PolicyParams(), outcome, rng)
            assert s.cw_lower == 0
            assert 32 <= s.cw_upper <= 1024


class TestArbSuccess:
    def test_small_draw_accumulates_average(self):
        params = PolicyParams(t_cw=16, cw_th=8, alpha=0.5)
        s = BackoffState(stage_i=1, cw_lower=0, cw_upper=32, cw_avg=2.0,
                         last_draw=3, counter=0)
        s2, _ = arb_on_success(s, params, SplitMix64(1))
        assert s2.cw_avg == 8.0
        assert s2.cw_lower == 4
        assert s2.cw_upper == 16 and s2.stage_i == 0

    def test_zero_draw_resets_average_with_default_lower(self):
        params = PolicyParams(t_cw=16, cw_th=8)
        s = BackoffState(0, 0, 16, 10.0, last_draw=0, counter=0)
        s2, _ = arb_on_success(s, params, SplitMix64(1))
        assert s2.cw_avg == 0.0 and s2.cw_lower == 1

    def test_threshold_draw_resets_average_and_lower(self):
        params = PolicyParams(t_cw=16, cw_th=8)
        s = BackoffState(0, 4, 16, 10.0, last_draw=8, counter=0)
        s2, _ = arb_on_success(s, params, SplitMix64(1))
        assert s2.cw_avg == 0.0 and s2.cw_lower == 0

    def test_lower_clamped_to_window(self):
        # accumulated average can push alpha*avg past the window top
        params = PolicyParams(t_cw=8, cw_th=8, alpha=1.0)
        s = BackoffState(0, 0, 8, 40.0, last_draw=3, counter=0)
        s2, _ = arb_on_success(s, params, SplitMix64(1))
        assert s2.cw_lower <= s2.cw_upper - 1
        assert s2.counter <= s2.cw_upper - 1

    def test_halving_variant_halves_instead_of_reset(self):
        params = PolicyParams(t_cw=16, halving_prob_f=1.0)
        s = BackoffState(0, 0, 128, 0.0, last_draw=20, counter=0)
        s2, _ = arb_on_success(s, params, SplitMix64(1), halving=True)
        assert s2.cw_upper == 64


class TestArbCollision:
    def test_window_doubles_from_live_upper(self):
        params = PolicyParams(t_cw=16)
        s = BackoffState(0, 0, 16, 2.0, last_draw=5, counter=0)
        s2, dropped = arb_on_collision(s, params, SplitMix64(1))
        assert s2.cw_upper == 32 and s2.stage_i == 1 and not dropped

    def test_window_pins_at_cw_max(self):
        params = PolicyParams(t_cw=16, retry_limit=20)
        s = BackoffState(0, 0, 16, 0.0, last_draw=5, counter=0)
        rng = SplitMix64(1)
        for _ in range(12):
            s, dropped = arb_on_collision(s, params, rng)
            assert not dropped
        assert s.cw_upper == 1024

    def test_draw_range_honours_lower_bound(self):
        params = PolicyParams(t_cw=16)
        rng = SplitMix64(9)
        draws = set()
        for _ in range(2000):
            s = BackoffState(0, 4, 16, 8.0, last_draw=5, counter=0)
            s2, _ = arb_on_collision(s, params, rng)
            assert s2.cw_upper == 32
            assert 3 <= s2.counter <= 31
            draws.add(s2.counter)
        assert min(draws) == 3 and max(draws) == 31

    def test_drop_resets_window_keeps_average(self):
        params = PolicyParams(t_cw=16, retry_limit=1)
        s = BackoffState(1, 4, 32, 6.0, last_draw=5, counter=0)
        s2, dropped = arb_on_collision(s, params, SplitMix64(1))
        assert dropped
        assert s2.cw_upper == 16 and s2.stage_i == 0
        assert s2.cw_lower == 0
        assert s2.cw_avg == 6.0

    def test_grow_from_cw_min_flag(self):
        params = PolicyParams(t_cw=16, grow_from_cw_min=True)
        s = BackoffState(0, 0, 16, 0.0, last_draw=5, counter=0)
        s2, _ = arb_on_collision(s, params, SplitMix64(1))
        assert s2.cw_upper == 64  # 32 * 2**1, not 16 * 2

    def test_prose_variant_updates_average_on_collision(self):
        params = PolicyParams(t_cw=16, cw_th=8, avg_on_collision=True)
        s = BackoffState(0, 0, 16, 2.0, last_draw=3, counter=0)
        s2, _ = arb_on_collision(s, params, SplitMix64(1))
        assert s2.cw_avg == 8.0 and s2.cw_lower == 4
        s3, _ = arb_on_success(s2, params, SplitMix64(2))
        assert s3.cw_avg == 8.0  # unchanged on success in this variant


class TestApplyHalving:
    def test_always_halves_at_f_one(self):
        params = PolicyParams(t_cw=16, halving_prob_f=1.0)
        rng = SplitMix64(5)
        assert all(apply_halving(128, params, rng) == 64 for _ in range(50))

    def test_never_halves_at_f_zero(self):
        params = PolicyParams(t_cw=16, halving_prob_f=0.0)
        rng = SplitMix64(5)
        assert all(apply_halving(128, params, rng) == 128 for _ in range(50))

    def test_floors_at_t_cw(self):
        params = PolicyParams(t_cw=16, halving_prob_f=1.0)
        assert apply_halving(16, params, SplitMix64(1)) == 16

    def test_intermediate_f_mixes(self):
        params = PolicyParams(t_cw=16, halving_prob_f=0.5)
        rng = SplitMix64(5)
        outs = {apply_halving(128, params, rng) for _ in range(200)}
        assert outs == {64, 128}


class TestWindowSequence:
    def test_beb_ladder(self):
        params = PolicyParams(cw_min=32, cw_max=1024, retry_limit=4)
        ws = window_sequence(params, PolicyKind.BEB)
        assert [w.upper for w in ws] == [32, 64, 128, 256, 512]
        assert all(w.lower == 0 for w in ws)

    def test_beb_stage_cap_freeze(self):
        params = PolicyParams(cw_min=32, cw_max=1024, retry_limit=6,
                              backoff_order_m=3)
        ws = window_sequence(params, PolicyKind.BEB)
        assert [w.upper for w in ws] == [32, 64, 128, 256, 256, 256, 256]

    def test_arb_ladder_honours_t_cw(self):
        params = PolicyParams(t_cw=16, retry_limit=4)
        ws = window_sequence(params, PolicyKind.ARB)
        assert [w.upper for w in ws] == [16, 32, 64, 128, 256]
        assert len({w.lower for w in ws}) == 1

    def test_arb_expected_lower_bound_matches_machine(self):
        # success-only drive of the actual machine is the oracle for the
        # closed steady-state recursion
        params = PolicyParams(t_cw=16, cw_th=8, alpha=0.5)
        rng = SplitMix64(123)
        s = initial_state(params, PolicyKind.ARB, rng)
        total = 0
        n = 20_000
        for _ in range(n):
            s, _ = arb_on_success(s, params, rng)
            total += s.cw_lower
        empirical = total / n
        assert abs(expected_arb_lower_bound(params) - empirical) <= 1.0

    def test_mean_backoff_accounts_for_lower_bound(self):
        from backofflab.policies import StageWindow
        assert StageWindow(0, 32).mean_backoff == 15.5
        assert StageWindow(4, 32).mean_backoff == (3 + 31) / 2


class TestReductionToBeb:
    def test_alpha_zero_matches_beb_with_t_cw_base(self):
        """alpha=0 ARB must trace BEB (cw_min = t_cw) state-for-state."""
        arb_params = PolicyParams(t_cw=16, alpha=0.0, cw_th=8, retry_limit=4)
        beb_params = PolicyParams(cw_min=16, cw_max=1024, retry_limit=4)
        rng_outcomes = random.Random(77)
        rng_a, rng_b = SplitMix64(42), SplitMix64(42)
        sa = initial_state(arb_params, PolicyKind.ARB, rng_a)
        sb = initial_state(beb_params, PolicyKind.BEB, rng_b)
        assert sa.counter == sb.counter
        for _ in range(500):
            outcome = (TxOutcome.COLLISION if rng_outcomes.random() < 0.4
                       else TxOutcome.SUCCESS)
            if outcome is TxOutcome.COLLISION:
                sa, da = arb_on_collision(sa, arb_params, rng_a)
            else:
                sa, da = arb_on_success(sa, arb_params, rng_a)
            sb, db = beb_on_outcome(sb, beb_params, outcome, rng_b)
            assert da == db
            assert sa.cw_upper == sb.cw_upper
            assert max(sa.cw_lower - 1, 0) == 0
            assert sa.counter == sb.counter


@st.composite
def policy_setup(draw):
    name = draw(st.sampled_from(["beb", "arb", "arb-halving"]))
    t_cw = draw(st.integers(min_value=1, max_value=64))
    cw_min = draw(st.integers(min_value=1, max_value=64))
    cw_max = cw_min * 2 ** draw(st.integers(min_value=0, max_value=6))
    params = PolicyParams(
        cw_min=cw_min, cw_max=cw_max,
        retry_limit=draw(st.integers(min_value=0, max_value=7)),
        t_cw=t_cw,
        cw_th=draw(st.integers(min_value=0, max_value=min(t_cw, cw_min))),
        alpha=draw(st.floats(min_value=0.0, max_value=1.0)),
        halving_prob_f=draw(st.floats(min_value=0.0, max_value=1.0)),
        backoff_order_m=draw(st.one_of(st.none(), st.integers(0, 8))),
        grow_from_cw_min=draw(st.booleans()),
        avg_on_collision=draw(st.booleans()),
    )
    outcomes = draw(st.lists(st.booleans(), min_size=1, max_size=60))
    seed = draw(st.integers(min_value=0, max_value=2**32))
    return name, params, outcomes, seed


class TestStateInvariants:
    @given(policy_setup())
    @settings(max_examples=300, deadline=None)
    def test_reachable_states_stay_valid(self, setup):
        name, params, outcomes, seed = setup
        policy = make_policy(name, params)
        rng = SplitMix64(seed)
        s = policy.initial(rng)
        for collided in outcomes:
            outcome = TxOutcome.COLLISION if collided else TxOutcome.SUCCESS
            s, dropped = policy.on_outcome(s, outcome, rng)
            assert 0 <= s.cw_lower <= s.cw_upper <= max(params.cw_max, params.t_cw)
            assert max(s.cw_lower - 1, 0) <= s.counter <= s.cw_upper - 1
            assert 0 <= s.stage_i <= params.retry_limit
            assert s.cw_avg >= 0.0
            if dropped:
                assert s.stage_i == 0

    def test_bulk_random_walks_all_policies(self):
        # 1e5 random outcome sequences per policy
        for name in ("beb", "arb", "arb-halving"):
            policy = make_policy(name, PolicyParams(halving_prob_f=0.5))
            outcome_rng = random.Random(len(name))
            rng = SplitMix64(17 * len(name))
            for _ in range(100_000):
                s = policy.initial(rng)
                for _ in range(outcome_rng.randrange(1, 12)):
                    outcome = (TxOutcome.COLLISION
                               if outcome_rng.random() < 0.6 else TxOutcome.SUCCESS)
                    s, _ = policy.on_outcome(s, outcome, rng)
                    assert max(s.cw_lower - 1, 0) <= s.counter <= s.cw_upper - 1

    def test_drop_happens_exactly_at_limit_plus_one_collisions(self):
        for name in ("beb", "arb"):
            params = PolicyParams(retry_limit=3)
            policy = make_policy(name, params)
            rng = SplitMix64(11)
            s = policy.initial(rng)
            for k in range(3):
                s, dropped = policy.on_outcome(s, TxOutcome.COLLISION, rng)
                assert not dropped, f"{name} dropped after {k + 1} collisions"
            s, dropped = policy.on_outcome(s, TxOutcome.COLLISION, rng)
            assert dropped, f"{name} failed to drop after 4 collisions"

    def test_avg_resets_whenever_draw_reaches_threshold(self):
        params = PolicyParams(t_cw=16, cw_th=8)
        rng = SplitMix64(21)
        policy = make_policy("arb", params)
        s = policy.initial(rng)
        for _ in range(500):
            s, _ = policy.on_outcome(s, TxOutcome.SUCCESS, rng)
            if s.last_draw >= 8:
                s2, _ = policy.on_outcome(s, TxOutcome.SUCCESS, rng)
                assert s2.cw_avg == 0.0
                s = s2


class TestParamValidation:
    @pytest.mark.parametrize("kwargs", [
        {"cw_min": 0}, {"cw_min": 64, "cw_max": 32}, {"t_cw": 0},
        {"retry_limit": -1}, {"sigma": 1}, {"alpha": -0.1}, {"alpha": 1.1},
        {"halving_prob_f": 2.0}, {"backoff_order_m": -1},
        {"cw_th": 40},  # above cw_min
    ])
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ValueError):
            PolicyParams(**kwargs)

    def test_cw_th_defaults_to_half_t_cw(self):
        assert PolicyParams(t_cw=16).effective_cw_th == 8
        assert PolicyParams(t_cw=16, cw_th=5).effective_cw_th == 5
