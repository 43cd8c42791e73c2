"""
Steering the output with coupling strengths
===========================================

Two inputs, one fed with |up> units and the other with |down> units. The
ratio r of the second reservoir's coupling to the first moves the output
population from the up state (r = 0) to the even mixture (r = 1). Detuning
one input from the output by eps = J hands the output entirely to the
other input's reservoir.
"""
import sys
from pathlib import Path

from qnnres import SweepSpec, preset, run_sweep

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "sweeps"

ratio = run_sweep(preset("fig2e"), SweepSpec("reservoir.1.ratio", (0.0, 0.25, 0.5, 0.75, 1.0), ("p_up_out",)), out)
for row in ratio.rows:
    print(f"r = {row.value:.2f}  p_up = {row.values['p_up_out']:.4f}  (steady at {row.steady_step})")
lin = ratio.linearity["p_up_out"]
print(f"trend {lin['monotone']}, largest distance from the end-point chord {lin['max_chord_deviation']:.4f}")

eps = (0.0, 0.015, 0.03, 0.045, 0.06)
for path, label in [("topology.offset.1", "J_2 = J - eps"), ("topology.offset.0", "J_1 = J - eps")]:
    rep = run_sweep(preset("fig2fg"), SweepSpec(path, eps, ("sigma_z_out",)), out)
    vals = ", ".join(f"{r.values['sigma_z_out']:+.3f}" for r in rep.rows)
    print(f"{label}: <sz_out> = {vals}")
