"""Conditional states at fixed times between jumps.

Between jumps the state follows the normalized no-jump evolution, so the
state at any time ``t`` in ``[t_j, t_{j+1})`` is the post-jump state ``rho_j``
propagated by the table entry nearest to ``t - t_j``. Every segment restarts
from its stored post-jump state, so rounding errors never carry over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Trajectory
from .errors import GapExceedsTable, VanishingTrace
from .operators import hermitize
from .precompute import PrecomputedTables, PureTables

__all__ = ["FilledTrajectory", "fill_states", "coarse_propagate"]

_TIME_SLACK = 1e-9


@dataclass
class FilledTrajectory:
    sample_times: np.ndarray
    states: np.ndarray  # (n_times, d, d)

    def __len__(self):
        return len(self.sample_times)


def _normalized(out: np.ndarray) -> np.ndarray:
    tr = np.real(np.trace(out))
    if tr < 1e-14:
        raise VanishingTrace(f"trace {tr:.3e} during filling")
    return hermitize(out / tr)


def _propagate_long(tables, rho: np.ndarray, index: int) -> np.ndarray:
    """Propagate past ``t_max`` by composing the last table entry (semigroup)."""
    last = tables.grid.n_points - 1
    while index > last:
        rho = _normalized(tables.propagate(last, rho))
        index -= last
    return _normalized(tables.propagate(index, rho))


def fill_states(
    trajectory: Trajectory, tables: PrecomputedTables | PureTables, sample_times
) -> FilledTrajectory:
    """States of ``trajectory`` at ``sample_times``.

    A sample time equal to a jump time returns that jump's post-jump state.
    Before the first jump the initial state is propagated from ``t = 0``.

    Raises:
        GapExceedsTable: a sample time lies more than ``t_max`` after the
            preceding jump. Trajectories that ended in a dark state are
            extended past ``t_max`` by composing table entries instead.
        ValueError: a sample time lies outside ``[0, horizon]``.
    """
    times = np.asarray(sample_times, dtype=float).reshape(-1)
    if times.size and (times.min() < -_TIME_SLACK or times.max() > trajectory.horizon + _TIME_SLACK):
        raise ValueError(f"sample times must lie in [0, {trajectory.horizon}]")
    jump_times = trajectory.jump_times
    seg_states = [trajectory.initial_density()] + [r.density() for r in trajectory.records]
    seg_starts = np.concatenate([[0.0], jump_times])
    segment = np.searchsorted(jump_times, times + _TIME_SLACK * 1e-3, side="right")
    dt = tables.grid.dt
    last = tables.grid.n_points - 1
    d = tables.dim
    out = np.empty((times.size, d, d), dtype=np.complex128)
    for n, (t, j) in enumerate(zip(times, segment)):
        index = int(np.floor((t - seg_starts[j]) / dt + 0.5))
        index = max(index, 0)
        rho = seg_states[j]
        if index > last:
            if trajectory.dark and j == len(seg_states) - 1:
                out[n] = _propagate_long(tables, rho, index)
                continue
            raise GapExceedsTable(
                f"sample time {t:g} is {t - seg_starts[j]:g} after the last jump; tables end at {tables.grid.t_max:g}"
            )
        out[n] = rho if index == 0 else _normalized(tables.propagate(index, rho))
    return FilledTrajectory(times, out)


def coarse_propagate(rho, tables: PrecomputedTables | PureTables, step_index: int, n_steps: int) -> list[np.ndarray]:
    """Iterate one fixed table propagator ``n_steps`` times, renormalizing each step.

    Returns ``n_steps + 1`` states starting with ``rho``.
    """
    tables.check_index(step_index)
    rho = np.asarray(rho, dtype=np.complex128)
    states = [rho]
    for _ in range(n_steps):
        rho = _normalized(tables.propagate(step_index, rho))
        states.append(rho)
    return states
