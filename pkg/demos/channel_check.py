"""
Is one collision a valid quantum channel?
=========================================

A collision acts linearly on the system, so it has a Choi matrix. Positivity
of that matrix and the identity partial trace certify complete positivity
and trace preservation for every preset's parameters.
"""
import numpy as np

from qnnres import PRESET_NAMES, collision_channel_choi, collision_fixed_point, preset
from qnnres.dynamics import choi_cptp_errors

for name in PRESET_NAMES:
    cfg = preset(name)
    if cfg.mode == "closed":
        continue
    choi = collision_channel_choi(cfg.topology, cfg.reservoirs, cfg.schedule.tau)
    err = choi_cptp_errors(choi, 2**cfg.topology.n_sites)
    print(f"{name:7s} min eig {err['min_eigenvalue']:+.1e}  trace preservation {err['trace_preservation']:.1e}")

# the fixed point of the map is the long-run state without running any collisions
cfg = preset("fig3b")
rho = collision_fixed_point(cfg.topology, cfg.reservoirs, cfg.schedule.tau)
print("fig3b fixed point, output populations:", np.round(np.real(np.diag(rho.reshape(8, 2, 8, 2).trace(axis1=0, axis2=2))), 4))
