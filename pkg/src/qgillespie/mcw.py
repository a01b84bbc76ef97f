"""Reference solvers used to validate the Gillespie sampler.

* :func:`mcw_ensemble` / :func:`mcw_trajectory`: fixed-step Monte Carlo
  wavefunction unravelling with first-order Kraus operators
  ``M_0 = 1 - i dt H_e`` and ``M_k = sqrt(dt) L_k``. The first-order ``M_0`` is
  intentional: this is the naive time-discretized baseline, including its
  O(dt) bias. Step probabilities are divided by their sum, which exceeds one
  by O(dt²).
* :func:`master_equation_evolve`: exact unconditional evolution ``exp(L t) rho``.
* :func:`steady_state`: null vector of the Liouvillian via SVD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import JumpRecord, Trajectory, _as_generator
from .errors import ConfigError, DegenerateSteadyState, PartialMonitoringUnsupported
from .models import LindbladModel, as_density, check, effective_hamiltonian, jump_rate_operator
from .operators import dag, expm, hermitize, identity, unvectorize, vectorize
from .precompute import build_liouvillian

__all__ = [
    "McwConfig",
    "McwResult",
    "mcw_trajectory",
    "mcw_ensemble",
    "master_equation_evolve",
    "steady_state",
    "liouvillian_residual",
]

GUARD = 0.05


@dataclass(frozen=True)
class McwConfig:
    """Step size and horizon of the discretized unravelling."""

    dt: float
    t_f: float
    guard: float = GUARD

    def check(self, model: LindbladModel) -> None:
        if not (self.dt > 0 and self.t_f > 0):
            raise ConfigError("dt and t_f must be positive", field="dt_mcw")
        scale = max(np.linalg.norm(effective_hamiltonian(model), 2), np.linalg.norm(jump_rate_operator(model), 2))
        if self.dt * scale > self.guard:
            raise ConfigError(
                f"dt*max(|H_e|,|J|) = {self.dt * scale:.3g} exceeds {self.guard}; first-order steps are invalid",
                field="dt_mcw",
            )


@dataclass
class McwResult:
    trajectories: list[Trajectory]
    n_steps: int

    @property
    def n_jumps(self) -> int:
        return sum(len(t) for t in self.trajectories)

    @property
    def steps_per_jump(self) -> float:
        """Time steps spent per detected jump, over the whole batch."""
        return self.n_steps * len(self.trajectories) / max(self.n_jumps, 1)


def _is_pure(rho: np.ndarray) -> tuple[bool, np.ndarray | None]:
    lam, vecs = np.linalg.eigh(rho)
    if lam[-1] > 1 - 1e-12:
        return True, vecs[:, -1]
    return False, None


def mcw_ensemble(
    model: LindbladModel, rho0, config: McwConfig, n_traj: int, rng
) -> McwResult:
    """Simulate ``n_traj`` fixed-step trajectories as one vectorized batch.

    All trajectories share one random stream (one uniform per trajectory per
    step), so trajectory ``i`` depends on ``n_traj``. Pure initial states are
    propagated as state vectors.
    """
    check(model)
    if not model.fully_monitored:
        raise PartialMonitoringUnsupported("the MCW baseline treats every channel as monitored")
    config.check(model)
    gen, seed, stream = _as_generator(rng)
    d = model.dim
    rho0 = as_density(rho0, d)
    dt = config.dt
    n_steps = int(round(config.t_f / dt))
    M0 = identity(d) - 1j * dt * effective_hamiltonian(model)
    Ls = [np.asarray(L) for L in model.monitored_jumps]
    LdLs = [dag(L) @ L for L in Ls]
    pure, psi0 = _is_pure(rho0)
    init = psi0 if pure else rho0
    trajs = [Trajectory(seed, stream, float(config.t_f), init.copy(), dt=dt) for _ in range(n_traj)]
    last_jump = np.zeros(n_traj, dtype=np.int64)

    if pure:
        state = np.tile(psi0, (n_traj, 1))
        M0T = M0.T
        LdLT = [A.T for A in LdLs]
    else:
        state = np.tile(rho0, (n_traj, 1, 1))
        M0d = dag(M0)

    for step in range(n_steps):
        if pure:
            phi0 = state @ M0T
            p0 = np.einsum("ni,ni->n", phi0.conj(), phi0).real
            pk = [dt * np.einsum("ni,ni->n", state.conj(), state @ A).real for A in LdLT]
        else:
            sig0 = M0 @ state @ M0d
            p0 = np.einsum("nii->n", sig0).real
            pk = [dt * np.einsum("ij,nji->n", A, state).real for A in LdLs]
        cum = np.cumsum(np.vstack([p0] + pk), axis=0)
        u = gen.random(n_traj) * cum[-1]
        choice = (u[None, :] >= cum[:-1]).sum(axis=0)
        jumped = np.flatnonzero(choice)
        if pure:
            new_state = phi0 / np.sqrt(p0)[:, None]
        else:
            new_state = sig0 / p0[:, None, None]
        if jumped.size:
            t_index = step + 1
            for n in jumped:
                k = int(choice[n]) - 1
                L = Ls[k]
                prev = state[n]
                if pure:
                    new = L @ prev
                    new = new / np.linalg.norm(new)
                else:
                    new = L @ prev @ dag(L)
                    new = hermitize(new / np.real(np.trace(new)))
                new_state[n] = new
                wait = (t_index - last_jump[n]) * dt
                trajs[n].records.append(
                    JumpRecord(wait, t_index * dt, k, new.copy(), int(t_index - last_jump[n]))
                )
                last_jump[n] = t_index
        state = new_state
    return McwResult(trajs, n_steps)


def mcw_trajectory(model: LindbladModel, rho0, config: McwConfig, rng) -> Trajectory:
    """Single fixed-step trajectory; see :func:`mcw_ensemble`."""
    return mcw_ensemble(model, rho0, config, 1, rng).trajectories[0]


def master_equation_evolve(model: LindbladModel, rho0, times) -> list[np.ndarray]:
    """Unconditional states ``unvec(exp(L t) vec(rho0))`` at each requested time."""
    check(model)
    d = model.dim
    rho0 = as_density(rho0, d)
    Lv = build_liouvillian(model)
    v0 = vectorize(rho0)
    times = np.asarray(times, dtype=float).reshape(-1)
    out = []
    for t in times:
        out.append(hermitize(unvectorize(expm(Lv * t) @ v0, d)))
    return out


def steady_state(model: LindbladModel, gap_tol: float = 1e-8) -> np.ndarray:
    """Unique stationary state from the smallest right singular vector of ``L``.

    Raises:
        DegenerateSteadyState: when the second-smallest singular value is
            not above ``gap_tol``.
    """
    check(model)
    Lv = build_liouvillian(model)
    _, s, vh = np.linalg.svd(Lv)
    if s[-2] <= gap_tol:
        raise DegenerateSteadyState(f"second-smallest singular value {s[-2]:.3e} <= {gap_tol:.1e}")
    rho = unvectorize(vh[-1].conj(), model.dim)
    rho = hermitize(rho)
    return rho / np.real(np.trace(rho))


def liouvillian_residual(model: LindbladModel, rho) -> float:
    """Frobenius norm of ``L(rho)``."""
    return float(np.linalg.norm(build_liouvillian(model) @ vectorize(rho)))

