"""Validate against the frozen reference operating points (1 Mb/s profile).

Two analytic readings are compared against the reference throughput (b/s)
and access delay (s) for the adaptive policy at T_CW=16:

* the contract reading: retry limit 4, per-stage-weighted backoff term;
* the full-ladder reading: retry limit 6 (window ladder reaching cw_max)
  with the ladder-sum delay convention.

Only the second lands every point inside the +/-10% / +/-15% bands; the
acceptance suite tracks both (test_c04*, test_s04).
"""

from backofflab import (AccessMode, PolicyKind, PolicyParams, evaluate,
                        one_mbps_params, slot_durations, window_sequence)

REFERENCE_NST = {50: 650260.0, 100: 579680.0, 200: 502340.0,
                 300: 454700.0, 400: 420300.0}
REFERENCE_CAD = {50: 6.175, 100: 9.11, 200: 13.56, 300: 17.24, 400: 20.56}

PHY = one_mbps_params()
DUR = slot_durations(PHY, AccessMode.BASIC)

for title, retry, window_sum in (
        ("contract reading (L=4, stage-weighted delay)", 4, False),
        ("full-ladder reading (L=6, ladder-sum delay)", 6, True)):
    print(f"\n=== {title} ===")
    print(f"{'N':>4} | {'nst_bps':>9} {'ref':>9} {'rel':>7} | "
          f"{'cad_s':>7} {'ref':>6} {'rel':>7}")
    params = PolicyParams(t_cw=16, retry_limit=retry)
    windows = window_sequence(params, PolicyKind.ARB)
    for n in sorted(REFERENCE_NST):
        sol, m = evaluate(n, windows, DUR, PHY.payload_bits,
                          PHY.data_rate_bps, retry,
                          window_sum_delay=window_sum)
        cad = m.e_delay_us / 1e6
        print(f"{n:>4} | {m.throughput_bps:9.0f} {REFERENCE_NST[n]:9.0f} "
              f"{m.throughput_bps / REFERENCE_NST[n] - 1:+7.1%} | "
              f"{cad:7.3f} {REFERENCE_CAD[n]:6.2f} "
              f"{cad / REFERENCE_CAD[n] - 1:+7.1%}")
