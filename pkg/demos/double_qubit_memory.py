"""A process with memory: post-jump states of a driven double qubit differ jump to jump.

Only the second qubit emits. After a click it is in its ground state, but the
driven first qubit can be anywhere, so the next waiting time depends on history.
"""

from __future__ import annotations

import numpy as np

from qgillespie import auto_tables, build_double_qubit, run_trajectory

model = build_double_qubit(omega=3.0, g=0.3, gamma=0.1)
tables = auto_tables(model)
print(f"grid: dt={tables.grid.dt:.4f}, t_max={tables.grid.t_max:.1f}, {tables.storage} storage")

traj = run_trajectory(model, tables, 0, t_f=400.0, rng=3)
n1 = np.diag([0, 0, 1, 1])
print("jump  time      wait    <n1> after jump")
for k, r in enumerate(traj.within_horizon()[:12]):
    print(f"{k:4d}  {r.absolute_time:8.2f}  {r.waiting_time:6.2f}  {np.trace(n1 @ r.post_jump_state).real:.4f}")

states = [r.post_jump_state for r in traj.records]
spread = max(np.linalg.norm(a - b) for a in states for b in states)
print(f"\nlargest distance between two post-jump states: {spread:.3f}")
