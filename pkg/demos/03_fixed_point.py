"""Solve the saturation fixed point across network sizes.

For each N the solver couples p = 1 - (1-tau)^(N-1) with the window-ladder
attempt probability. Two normalisations are available: the counter-stall
form (default) and the per-slot-decrement chain; the slot-accurate
simulator's measured statistics track the latter.
"""

from backofflab import PolicyKind, PolicyParams, solve_fixed_point, window_sequence

windows = window_sequence(PolicyParams(retry_limit=6), PolicyKind.BEB)
print("BEB ladder:", [w.upper for w in windows])
print(f"\n{'N':>4} | {'tau (stall)':>12} {'p (stall)':>10} | "
      f"{'tau (chain)':>12} {'p (chain)':>10} | {'residual':>9}")
for n in (2, 5, 10, 20, 50, 100, 200, 400):
    a = solve_fixed_point(n, windows)
    b = solve_fixed_point(n, windows, normalization="per-slot")
    print(f"{n:>4} | {a.tau:12.6f} {a.p:10.6f} | "
          f"{b.tau:12.6f} {b.p:10.6f} | {a.residual:9.1e}")

w0 = windows[0].upper
from backofflab import tau_of_p
print(f"\nzero-collision check: tau(p=0) = {tau_of_p(0.0, windows):.8f} "
      f"= 2/(W0+1) = {2 / (w0 + 1):.8f}")
