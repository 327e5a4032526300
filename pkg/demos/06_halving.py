"""Effect of the halving probability on the window-halving variant.

After each success the variant halves its window with probability f
(floored at the initial window) instead of resetting it. f=1 tracks the
plain adaptive policy most closely; smaller f keeps windows wide for
longer, trading delay for fewer collisions and drops.
"""

import numpy as np

from backofflab import PolicyParams, ScenarioConfig, one_mbps_params, run

PHY = one_mbps_params()

print(f"{'N':>4} {'f':>5} | {'snorm':>7} | {'delay ms':>9} | {'drop':>7} | {'p':>7}")
for n in (100, 200, 400):
    for f in (0.25, 0.5, 1.0):
        vals = {"s": [], "d": [], "dr": [], "p": []}
        for seed in range(1, 6):
            m = run(ScenarioConfig(
                n_nodes=n, policy_name="arb-halving",
                policy=PolicyParams(t_cw=4, retry_limit=4, halving_prob_f=f),
                phy=PHY, seed=seed, horizon_slots=150_000, warmup_slots=15_000))
            vals["s"].append(m.throughput_norm)
            vals["d"].append(m.mean_access_delay_us / 1e3)
            vals["dr"].append(m.dropped_packets
                              / max(m.delivered_packets + m.dropped_packets, 1))
            vals["p"].append(m.measured_p)
        print(f"{n:>4} {f:>5.2f} | {np.mean(vals['s']):7.4f} | "
              f"{np.mean(vals['d']):9.1f} | {np.mean(vals['dr']):7.4f} | "
              f"{np.mean(vals['p']):7.4f}")
    print()

print("CLI equivalent: configs/cad_vs_nodes_halving.json")
