"""Waiting-time distribution of a driven two-level atom, three ways.

The tabulated distribution, a Gillespie histogram and a fixed-step Monte Carlo
wavefunction histogram are printed side by side.
"""

from __future__ import annotations

import numpy as np

from qgillespie import (
    McwConfig,
    RngStream,
    TimeGrid,
    build_resonant_fluorescence,
    build_tables,
    histogram_from_waits,
    mcw_ensemble,
    pooled_waits,
    run_ensemble,
    total_variation,
    wtd_weights,
)

model = build_resonant_fluorescence(delta=0.0, omega=0.5, gamma=0.5)
tables = build_tables(model, TimeGrid.from_t_max(0.01, 40.0))

# every emission resets the atom to its ground state, so one distribution describes all waits
ground = np.diag([1.0, 0.0]).astype(complex)
w = wtd_weights(tables, ground)
print(f"tail beyond t_max: {tables.survival(ground):.2e}")
print(f"mean wait from the table: {np.trapezoid(tables.times * w, tables.times):.3f}")

gillespie = run_ensemble(model, tables, 0, t_f=200.0, n_traj=300, base_seed=1)
mcw = mcw_ensemble(model, 0, McwConfig(dt=1e-3, t_f=200.0), 300, RngStream(2)).trajectories

edges = np.linspace(0, 20, 21)
hg = histogram_from_waits(pooled_waits(gillespie), edges)
hm = histogram_from_waits(pooled_waits(mcw), edges)
print("\n  t      table   gillespie   mcw")
for i, t in enumerate(hg.centers):
    exact = np.interp(t, tables.times, w)
    print(f"{t:5.1f}  {exact:7.4f}  {hg.density[i]:9.4f}  {hm.density[i]:7.4f}")
print(f"\ntotal variation between the histograms: {total_variation(hg, hm):.4f}")
