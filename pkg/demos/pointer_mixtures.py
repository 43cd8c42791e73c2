"""
Three reservoirs and the pointer basis
======================================

Three inputs, each with its own reservoir. Orthogonal unit states leave the
output in a classical mixture whose weights count the reservoirs. Tilting
one reservoir to theta = pi/6 keeps the output close to the mixture of the
three unit states but leaves only a trace of coherence behind.
"""
import sys
from pathlib import Path

from qnnres import predict_pointer_steady_state, preset, run_scenario

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "pointer"

for name, counts in [("fig3b", (2, 1)), ("fig3d", (1, 2))]:
    s = run_scenario(preset(name), out).steady
    expected = predict_pointer_steady_state(*counts)[0, 0].real
    print(f"{name}: p_up = {s.steady_values['p_up_out']:.4f} (counting gives {expected:.4f}), "
          f"coherence {s.steady_values['coherence_out']:.1e}")

s = run_scenario(preset("fig3e"), out, emit=("csv", "svg")).steady
print(f"fig3e: F(mixture, rho_out) = {s.steady_values['fidelity:m']:.4f}, "
      f"C_l1 = {s.steady_values['coherence_out']:.2e}")
