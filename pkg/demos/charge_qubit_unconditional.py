"""Averaging filled trajectories recovers the unconditional master-equation evolution.

A charge qubit (double quantum dot) is watched by a point contact whose click
rate depends on which dot holds the electron.
"""

from __future__ import annotations

import numpy as np

from qgillespie import (
    auto_grid,
    build_charge_qubit,
    build_tables,
    ensemble_average,
    master_equation_evolve,
    run_ensemble,
    trace_distance,
)

model = build_charge_qubit(omega1=1.0, omega2=1.0, omega=1.0, tunnel=1.0, chi=1.0)
times = np.linspace(0.0, 10.0, 21)
# pick dt so the sample times land on the grid
tables = build_tables(model, auto_grid(model, dt=(times[1] - times[0]) / 40))

electron_in_dot1 = 2
trajectories = run_ensemble(model, tables, electron_in_dot1, t_f=10.0, n_traj=400, base_seed=5)
average = ensemble_average(trajectories, tables, times)
exact = master_equation_evolve(model, electron_in_dot1, times)

z_c = np.diag([0, -1, 1, 0])
print("  t     <z_c> average   <z_c> exact   trace distance")
for t, a, e in zip(times, average, exact):
    print(f"{t:5.1f}  {np.trace(z_c @ a).real:13.4f}  {np.trace(z_c @ e).real:12.4f}  {trace_distance(a, e):14.4f}")
