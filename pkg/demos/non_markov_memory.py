"""
A reservoir with memory
=======================

Here each used unit talks to the next one before it leaves, so information
handed to the reservoir can come back. The output no longer settles on the
reservoir state and its correlations with the units rise and fall again.
"""
import sys
from pathlib import Path

import numpy as np

from qnnres import preset, run_scenario

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "memory"
report = run_scenario(preset("fig4"), out, emit=("csv", "svg"))
mi = report.trace.series("mutual_info_out_unit")
f = report.trace.series("fidelity:unit")

# count local maxima of the mutual information after the first one
peaks = np.flatnonzero((mi[1:-1] > mi[:-2]) & (mi[1:-1] > mi[2:])) + 1
print(f"mutual information: {len(peaks)} local maxima, largest {mi.max():.4f}")
quarter = f[-len(f) // 4 :]
print(f"fidelity to the unit state over the last quarter: mean {quarter.mean():.4f}, "
      f"range {quarter.min():.4f} .. {quarter.max():.4f}")
