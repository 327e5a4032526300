"""Simulate BEB against the adaptive policy across network sizes.

Saturated nodes, 1 Mb/s profile, seeds averaged. Prints normalized
throughput, mean access delay, and drop fraction per policy, plus the
model's prediction for context. Writes a CSV next to this script.
"""

import csv
import os

import numpy as np

from backofflab import (AccessMode, PolicyParams, ScenarioConfig, evaluate,
                        make_policy, one_mbps_params, run, slot_durations)

NS = (50, 100, 200, 300, 400)
SEEDS = range(1, 6)
PHY = one_mbps_params()
DUR = slot_durations(PHY, AccessMode.BASIC)

rows = []
for n in NS:
    row = {"n_nodes": n}
    for name in ("beb", "arb"):
        params = PolicyParams(retry_limit=4, t_cw=16)
        thr, delay, drop = [], [], []
        for seed in SEEDS:
            m = run(ScenarioConfig(n_nodes=n, policy_name=name, policy=params,
                                   phy=PHY, seed=seed, horizon_slots=150_000,
                                   warmup_slots=15_000))
            thr.append(m.throughput_norm)
            delay.append(m.mean_access_delay_us)
            drop.append(m.dropped_packets
                        / max(m.delivered_packets + m.dropped_packets, 1))
        row[f"snorm_{name}"] = float(np.mean(thr))
        row[f"cad_{name}_ms"] = float(np.mean(delay)) / 1e3
        row[f"drop_{name}"] = float(np.mean(drop))
        windows = make_policy(name, params).windows()
        _, model = evaluate(n, windows, DUR, PHY.payload_bits,
                            PHY.data_rate_bps, params.retry_limit)
        row[f"snorm_{name}_model"] = model.throughput_norm
    rows.append(row)
    print(f"N={n:3d}  S: beb {row['snorm_beb']:.3f} vs arb {row['snorm_arb']:.3f}   "
          f"delay: beb {row['cad_beb_ms']:7.1f} ms vs arb {row['cad_arb_ms']:7.1f} ms   "
          f"drop: beb {row['drop_beb']:.3f} vs arb {row['drop_arb']:.3f}")

out = os.path.join(os.path.dirname(__file__), "policy_comparison.csv")
with open(out, "w", newline="") as f:
    writer = csv.DictWriter(f, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
print(f"\nwrote {out}")
print("""
In saturation the adaptive policy (initial window 16) turns around its
packets faster -- lower access delay -- but attempts more often than
BEB-from-32, so it collides and drops more, which costs throughput at
moderate N. The same CSV can be produced through the CLI with
configs/nst_vs_nodes.json and friends.
""")
