"""Where the detection threshold sits for the Curie-Weiss model.

Prints the spontaneous magnetization and the sharp constant across β, then
runs a small risk sweep at β = 0.5 and β = 1.5 on either side of c = 1.

    python3 demos/sharp_constant_walkthrough.py
"""
import numpy as np

from isingscan.meanfield import sharp_constant, solve_m
from isingscan.risk import ExperimentPlan, run_risk

print("beta      m(beta)   constant")
for beta in np.arange(0.25, 3.01, 0.25):
    print(f"{beta:4.2f}  {solve_m(beta).m:9.4f}  {sharp_constant(beta):9.4f}")

for beta, test in ((0.5, "high_temp_scan"), (1.5, "low_temp_randomized_scan")):
    plan = ExperimentPlan(n=2000, s=100, count=20, test=test, constants=(0.5, 1.0, 2.0),
                          type1_replications=200, type2_replications=100, seed=1)
    rep = run_risk(plan, beta)
    print(f"\nbeta={beta} {test}: type I {rep.type1:.3f}")
    for pt in rep.points:
        print(f"  c={pt.c:3.1f}  A={pt.A:.4f}  type II {pt.type2:.3f}  risk {pt.risk:.3f}")
