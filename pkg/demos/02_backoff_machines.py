"""Watch the three backoff machines react to the same outcome sequence.

BEB resets its window after every success; the adaptive policy additionally
raises the lower bound of the next draw from a running average of recent
small draws; the halving variant shrinks the window gradually instead of
resetting it.
"""

from backofflab import PolicyParams, SplitMix64, TxOutcome, make_policy

OUTCOMES = [TxOutcome.COLLISION, TxOutcome.COLLISION, TxOutcome.SUCCESS,
            TxOutcome.SUCCESS, TxOutcome.COLLISION, TxOutcome.SUCCESS,
            TxOutcome.SUCCESS, TxOutcome.SUCCESS]

for name in ("beb", "arb", "arb-halving"):
    policy = make_policy(name, PolicyParams(t_cw=16, halving_prob_f=1.0))
    rng = SplitMix64(2024)
    state = policy.initial(rng)
    print(f"\n=== {name} ===")
    print(f"start: window [{max(state.cw_lower - 1, 0)}, {state.cw_upper - 1}] "
          f"drew {state.counter}")
    for outcome in OUTCOMES:
        state, dropped = policy.on_outcome(state, outcome, rng)
        lo = max(state.cw_lower - 1, 0)
        print(f"{outcome.value:>9}: stage {state.stage_i}  "
              f"window [{lo:3d}, {state.cw_upper - 1:4d}]  "
              f"drew {state.counter:4d}  avg {state.cw_avg:6.1f}"
              + ("  [packet dropped]" if dropped else ""))

print("""
The adaptive machine's 'avg' column accumulates 2*draw while successful
draws stay below the threshold (t_cw/2 by default) and collapses to zero
once a draw reaches it; half of the average becomes the next lower bound.
""")
