"""Lyapunov truth table for the two switches, and the gate it implements."""
from optosync import SystemParams, classify_logic

res = classify_logic(SystemParams.fig2(), mu_on=0.004, lambda_on=0.16)
for (mu, lam), r in zip(res.corners, res.results):
    print(f"mu={mu:<6} lambda={lam:<5} exponent {r.exponent:+.2e} +/- {r.stderr:.1e}  {r.classification}")
print("gate:", res.gate)
