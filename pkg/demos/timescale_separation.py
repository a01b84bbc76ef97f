"""Cost per jump as the emission rate drops.

A fixed-step solver spends about 1/(gamma * dt) steps waiting for each click.
The Gillespie sampler jumps straight from one click to the next.
"""

from __future__ import annotations

import time

from qgillespie import McwConfig, RngStream, auto_tables, build_resonant_fluorescence, mcw_ensemble, run_ensemble

print("gamma    table points   gillespie us/jump   mcw steps/jump")
for gamma in (0.5, 0.05, 0.005):
    model = build_resonant_fluorescence(0.0, 0.5, gamma)
    tables = auto_tables(model)
    mean_wait = (0.5 + gamma**2 / 4) / (0.25 * gamma)
    t0 = time.perf_counter()
    trajs = run_ensemble(model, tables, 0, 100 * mean_wait, 10, base_seed=1)
    per_jump = (time.perf_counter() - t0) / sum(len(t) for t in trajs)
    mcw = mcw_ensemble(model, 0, McwConfig(0.02, 20 * mean_wait), 10, RngStream(1))
    print(f"{gamma:<8} {tables.grid.n_points:12d}   {1e6 * per_jump:17.0f}   {mcw.steps_per_jump:14.0f}")
