"""Quantum Gillespie sampler.

Each step draws a waiting time from the tabulated distribution
``W(t_i | rho) = tr(Q[i] rho)``, propagates the state with ``V[i]``, draws a
monitored channel with probability proportional to ``tr(L_k^† L_k rho)`` and
applies the jump. No small time steps are taken between jumps.

Random numbers: every trajectory owns one generator and consumes exactly two
uniforms per jump (waiting time, then channel). The mixed-state and pure-state
loops share this order, so the same stream yields the same jump record.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZeroWeights,
    PartialMonitoringUnsupported,
    QGillespieError,
    VanishingTrace,
    ZeroJumpProbability,
)
from .models import LindbladModel, as_density, as_pure
from .operators import dag, hermitize
from .precompute import PrecomputedTables, PureTables, WaitingTime

__all__ = [
    "RngStream",
    "JumpRecord",
    "Trajectory",
    "sample_waiting_time",
    "evolve_nojump",
    "sample_channel",
    "apply_jump",
    "run_trajectory",
    "run_trajectory_pure",
    "run_ensemble",
    "replay_trajectory",
]

TRACE_FLOOR = 1e-14


@dataclass(frozen=True)
class RngStream:
    """Reproducible stream ``stream`` of the family seeded by ``seed``.

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream,))`` feeding
    a PCG64 generator, so stream ``i`` does not depend on how many other
    streams exist or in which order they run.
    """

    seed: int
    stream: int = 0
    algorithm: str = "PCG64"

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> tuple[np.random.Generator, int | None, int | None]:
    if isinstance(rng, RngStream):
        return rng.generator(), rng.seed, rng.stream
    if isinstance(rng, np.random.Generator):
        return rng, None, None
    if isinstance(rng, (int, np.integer)):
        stream = RngStream(int(rng))
        return stream.generator(), stream.seed, stream.stream
    raise TypeError(f"expected RngStream, Generator or int seed, got {type(rng).__name__}")


@dataclass
class JumpRecord:
    """One detected jump.

    ``post_jump_state`` is a density matrix for mixed trajectories and a state
    vector for pure ones. ``beyond_horizon`` marks the final jump that lands
    after the horizon; ``beyond_table`` marks a draw from the survival tail,
    resolved at the last grid time.
    """

    waiting_time: float
    absolute_time: float
    channel: int
    post_jump_state: np.ndarray
    wait_index: int
    beyond_horizon: bool = False
    beyond_table: bool = False

    def density(self) -> np.ndarray:
        s = self.post_jump_state
        return np.outer(s, s.conj()) if s.ndim == 1 else s


@dataclass
class Trajectory:
    """Jump record of a single run over ``[0, horizon]``.

    ``dark`` is set when the run stopped because the state could no longer
    emit on any monitored channel (an absorbing state).
    """

    seed: int | None
    stream: int | None
    horizon: float
    initial_state: np.ndarray
    records: list[JumpRecord] = field(default_factory=list)
    dark: bool = False
    dt: float | None = None

    @property
    def pure(self) -> bool:
        return self.initial_state.ndim == 1

    @property
    def waiting_times(self) -> np.ndarray:
        return np.array([r.waiting_time for r in self.records])

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([r.absolute_time for r in self.records])

    @property
    def channels(self) -> np.ndarray:
        return np.array([r.channel for r in self.records], dtype=int)

    def within_horizon(self) -> list[JumpRecord]:
        return [r for r in self.records if not r.beyond_horizon]

    def initial_density(self) -> np.ndarray:
        s = self.initial_state
        return np.outer(s, s.conj()) if s.ndim == 1 else s

    def __len__(self):
        return len(self.records)


def sample_waiting_time(tables: PrecomputedTables | PureTables, rho, rng: np.random.Generator) -> WaitingTime:
    """Draw the grid index of the next jump from ``p_i ∝ tr(Q[i] rho)``.

    Index 0 is excluded so that consecutive jumps are separated by at least
    one grid step. With probability equal to the survival at ``t_max`` the
    draw lands in the tail and is resolved at the last grid index, flagged.

    Raises:
        AllZeroWeights: the state is dark on this grid.
    """
    tail, cdf = tables.distribution(rho)
    n = tables.grid.n_points
    u = rng.random()
    if u < tail:
        return WaitingTime(n - 1, (n - 1) * tables.grid.dt, True)
    u = (u - tail) / (1.0 - tail)
    index = min(int(np.searchsorted(cdf, u, side="right")), n - 1)
    return WaitingTime(index, index * tables.grid.dt, False)


def evolve_nojump(tables: PrecomputedTables | PureTables, rho, index: int) -> np.ndarray:
    """Normalized no-jump evolution ``V[index]`` applied to ``rho``."""
    out = tables.propagate(index, np.asarray(rho, dtype=np.complex128))
    tr = np.real(np.trace(out))
    if tr < TRACE_FLOOR:
        raise VanishingTrace(f"trace {tr:.3e} after no-jump evolution to index {index}")
    return hermitize(out / tr)


def _jump_weights(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    if rho.ndim == 1:
        p = np.array([np.vdot(L @ rho, L @ rho).real for L in model.monitored_jumps])
    else:
        p = np.array([np.real(np.einsum("ij,ji->", dag(L) @ L, rho)) for L in model.monitored_jumps])
    return np.maximum(p, 0.0)


def sample_channel(model: LindbladModel, rho, rng: np.random.Generator) -> int:
    """Draw a monitored channel ``k`` with probability ``tr(L_k^† L_k rho) / tr(J rho)``.

    Accepts a density matrix or a state vector. Always consumes one uniform.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    p = _jump_weights(model, rho)
    total = p.sum()
    u = rng.random()
    if not total > 0:
        raise ZeroJumpProbability("all monitored channels have zero probability")
    cdf = np.cumsum(p) / total
    return min(int(np.searchsorted(cdf, u, side="right")), len(p) - 1)


def apply_jump(model: LindbladModel, rho, k: int) -> np.ndarray:
    """Post-jump state ``L_k rho L_k^† / tr(...)``, or ``L_k psi / ||L_k psi||`` for vectors."""
    rho = np.asarray(rho, dtype=np.complex128)
    L = model.monitored_jumps[k]
    if rho.ndim == 1:
        out = L @ rho
        norm = np.linalg.norm(out)
        if norm**2 < TRACE_FLOOR:
            raise ZeroJumpProbability(f"channel {k} has zero probability for this state")
        return out / norm
    out = L @ rho @ dag(L)
    tr = np.real(np.trace(out))
    if tr < TRACE_FLOOR:
        raise ZeroJumpProbability(f"channel {k} has zero probability for this state")
    return hermitize(out / tr)


def _evolve_pure(tables: PureTables, psi: np.ndarray, index: int) -> np.ndarray:
    out = tables.propagate_pure(index, psi)
    norm = np.linalg.norm(out)
    if norm**2 < TRACE_FLOOR:
        raise VanishingTrace(f"norm {norm:.3e} after no-jump evolution to index {index}")
    return out / norm


def _run(model, tables, state, t_f, rng, pure: bool) -> Trajectory:
    gen, seed, stream = _as_generator(rng)
    traj = Trajectory(seed, stream, float(t_f), state.copy(), dt=tables.grid.dt)
    tau_index = 0
    dt = tables.grid.dt
    tau = 0.0
    while tau < t_f:
        dens = np.outer(state, state.conj()) if pure else state
        try:
            wt = sample_waiting_time(tables, dens, gen)
        except AllZeroWeights:
            traj.dark = True
            break
        # accumulate integer grid steps so absolute times carry no rounding drift
        tau_index += wt.index
        tau = tau_index * dt
        try:
            if pure:
                evolved = _evolve_pure(tables, state, wt.index)
            else:
                evolved = evolve_nojump(tables, state, wt.index)
            k = sample_channel(model, evolved, gen)
            state = apply_jump(model, evolved, k)
        except QGillespieError as exc:
            raise type(exc)(f"{exc} (jump {len(traj.records)}, t={tau:g}, seed={seed}, stream={stream})") from exc
        traj.records.append(
            JumpRecord(wt.time, tau, k, state, wt.index, beyond_horizon=tau > t_f, beyond_table=wt.beyond_table)
        )
    return traj


def run_trajectory(model: LindbladModel, tables: PrecomputedTables, rho0, t_f: float, rng) -> Trajectory:
    """Simulate one mixed-state trajectory up to the first jump at or after ``t_f``.

    Args:
        model: The model the tables were built for.
        tables: Output of :func:`~qgillespie.precompute.build_tables`.
        rho0: Initial density matrix, state vector or basis index.
        t_f: Horizon.
        rng: :class:`RngStream`, ``numpy`` Generator or integer seed.

    The jump that crosses ``t_f`` is kept with ``beyond_horizon=True``. Reaching
    a dark state ends the run cleanly with ``dark=True``.
    """
    if isinstance(tables, PureTables):
        raise TypeError("run_trajectory needs superoperator tables; use run_trajectory_pure")
    rho = as_density(rho0, model.dim)
    return _run(model, tables, rho, t_f, rng, pure=False)


def run_trajectory_pure(model: LindbladModel, tables: PureTables, psi0, t_f: float, rng) -> Trajectory:
    """State-vector version of :func:`run_trajectory`; requires full monitoring."""
    if not model.fully_monitored:
        raise PartialMonitoringUnsupported("pure-state trajectories need every jump channel monitored")
    if not isinstance(tables, PureTables):
        raise TypeError("run_trajectory_pure needs tables from build_pure_tables")
    if isinstance(psi0, (int, np.integer)):
        psi = np.zeros(model.dim, dtype=np.complex128)
        psi[int(psi0)] = 1.0
    else:
        psi = as_pure(psi0, model.dim)
    return _run(model, tables, psi, t_f, rng, pure=True)


def run_ensemble(
    model: LindbladModel,
    tables: PrecomputedTables | PureTables,
    state0,
    t_f: float,
    n_traj: int,
    base_seed: int,
    workers: int = 1,
) -> list[Trajectory]:
    """Run ``n_traj`` trajectories; trajectory ``i`` uses ``RngStream(base_seed, i)``.

    Tables are shared read-only across worker threads. Output order and
    content do not depend on ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    run = run_trajectory_pure if isinstance(tables, PureTables) else run_trajectory

    def one(i):
        return run(model, tables, state0, t_f, RngStream(base_seed, i))

    if workers is None or workers <= 1:
        return [one(i) for i in range(n_traj)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_traj)))


def replay_trajectory(
    model: LindbladModel,
    tables: PrecomputedTables | PureTables,
    state0,
    jumps,
    horizon: float,
    seed: int | None = None,
    stream: int | None = None,
) -> Trajectory:
    """Rebuild post-jump states from recorded ``(waiting_time, channel, beyond_horizon)`` triples.

    Waiting times are rounded to the nearest grid index, so a record produced
    on the same grid is reproduced exactly.
    """
    pure = isinstance(tables, PureTables)
    if pure and isinstance(state0, (int, np.integer)):
        state = np.zeros(model.dim, dtype=np.complex128)
        state[int(state0)] = 1.0
    elif pure:
        state = as_pure(state0, model.dim)
    else:
        state = as_density(state0, model.dim)
    dt = tables.grid.dt
    last = tables.grid.n_points - 1
    traj = Trajectory(seed, stream, float(horizon), state.copy(), dt=dt)
    tau_index = 0
    for wait, k, flag in jumps:
        index = min(int(np.floor(wait / dt + 0.5)), last)
        tau_index += index
        evolved = _evolve_pure(tables, state, index) if pure else evolve_nojump(tables, state, index)
        state = apply_jump(model, evolved, int(k))
        traj.records.append(
            JumpRecord(index * dt, tau_index * dt, int(k), state, index,
                       beyond_horizon=bool(flag), beyond_table=index == last)
        )
    dens = np.outer(state, state.conj()) if pure else state
    try:
        tables.distribution(dens)
    except AllZeroWeights:
        traj.dark = True
    return traj
