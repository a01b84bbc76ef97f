"""Tabulated no-jump propagators and waiting-time kernels.

For a uniform grid ``t_i = i * dt`` this module builds

* ``V[i] = exp(L0 t_i)``, the vectorized no-jump propagator (d² x d²),
* ``Q[i] = unvec(exp(L0^† t_i) vec(J))``, so that the waiting-time density
  for a state ``rho`` is ``W(t_i | rho) = tr(Q[i] rho)``,

where ``L0`` is the Liouvillian with the monitored jump terms removed and
``J`` the sum of ``L^† L`` over monitored channels. The propagator chain is
built from one ``expm`` call: ``V[i+1] = E V[i]`` with ``E = exp(L0 dt)``.

When every channel is monitored, :func:`build_pure_tables` stores the d x d
propagators ``U[i] = exp(-i H_e t_i)`` instead.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    AllZeroWeights,
    GapExceedsTable,
    PartialMonitoringUnsupported,
    TableError,
    TailMassTooLarge,
)
from .models import LindbladModel, check, effective_hamiltonian, jump_rate_operator
from .operators import dag, expm, hermitize, identity, unvectorize, vectorize

__all__ = [
    "TimeGrid",
    "PrecomputedTables",
    "PureTables",
    "build_nojump_superoperator",
    "build_liouvillian",
    "build_tables",
    "build_pure_tables",
    "auto_grid",
    "auto_tables",
    "wtd_weights",
    "table_hash",
    "save_tables",
    "load_tables",
    "cached_tables",
    "DEFAULT_TAIL_TOLERANCE",
    "DEFAULT_WEIGHT_FLOOR",
]

DEFAULT_TAIL_TOLERANCE = 1e-3
DEFAULT_WEIGHT_FLOOR = 1e-12
DEFAULT_MEMORY_BUDGET = 256 * 2**20  # bytes allowed for a dense V table
# key precision for the waiting-time distribution cache
STATE_KEY_DECIMALS = 10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * dt`` for ``i = 0 .. n_points - 1``."""

    dt: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_t_max(cls, dt: float, t_max: float) -> "TimeGrid":
        return cls(dt, int(np.ceil(t_max / dt - 1e-9)) + 1)

    @property
    def t_max(self) -> float:
        return self.dt * (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt

    def nearest_index(self, t: float) -> int:
        return int(np.floor(t / self.dt + 0.5))


class WaitingTime(NamedTuple):
    index: int
    time: float
    beyond_table: bool


def build_nojump_superoperator(model: LindbladModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized no-jump generator ``L0`` and its adjoint.

    ``L0`` is the full Liouvillian minus the monitored jump terms ``L ρ L^†``.
    The adjoint is assembled term by term and agrees with ``L0.conj().T``.
    """
    check(model)
    d = model.dim
    eye = identity(d)
    H = model.hamiltonian
    L0 = -1j * np.kron(eye, H) + 1j * np.kron(H.T, eye)
    L0_adj = 1j * np.kron(eye, H) - 1j * np.kron(H.T, eye)
    for S in model.unmonitored_jumps:
        SdS = dag(S) @ S
        L0 += np.kron(S.conj(), S) - 0.5 * np.kron(eye, SdS) - 0.5 * np.kron(SdS.T, eye)
        L0_adj += np.kron(S.T, dag(S)) - 0.5 * np.kron(SdS.T, eye) - 0.5 * np.kron(eye, SdS)
    for L in model.monitored_jumps:
        LdL = dag(L) @ L
        L0 += -0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye)
        L0_adj += -0.5 * np.kron(LdL.T, eye) - 0.5 * np.kron(eye, LdL)
    return L0, L0_adj


def build_liouvillian(model: LindbladModel) -> np.ndarray:
    """Full vectorized Liouvillian, with every channel contributing its jump term."""
    L0, _ = build_nojump_superoperator(model)
    for L in model.monitored_jumps:
        L0 = L0 + np.kron(L.conj(), L)
    return L0


class _WtdTables:
    """Shared waiting-time machinery for the mixed and pure table flavours."""

    grid: TimeGrid
    J: np.ndarray
    Q: np.ndarray
    survival_op: np.ndarray
    tail_tolerance: float
    weight_floor: float

    def _init_cache(self, size: int):
        self._cache: OrderedDict[bytes, tuple[float, np.ndarray]] = OrderedDict()
        self._cache_size = size
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def weights(self, rho: np.ndarray) -> np.ndarray:
        """``max(0, Re tr(Q[i] rho))`` for every grid point."""
        n, d, _ = self.Q.shape
        w = (self.Q.reshape(n, d * d) @ np.ascontiguousarray(rho.T).reshape(d * d)).real
        np.maximum(w, 0.0, out=w)
        return w

    def survival(self, rho: np.ndarray) -> float:
        """Probability that no monitored jump occurs before ``t_max``."""
        return float(np.clip(np.real(np.einsum("ij,ji->", self.survival_op, rho)), 0.0, 1.0))

    def survival_curve(self, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distribution(self, rho: np.ndarray) -> tuple[float, np.ndarray]:
        """Tail probability and normalized CDF over grid indices for ``rho``.

        The state is rounded before evaluation and results are memoized on the
        rounded state, so renewal processes pay the O(n_points) cost once per
        distinct post-jump state. Because the value depends only on the key,
        sampling stays independent of execution order.
        """
        key_state = np.round(np.asarray(rho, dtype=np.complex128), STATE_KEY_DECIMALS) + 0.0
        key = key_state.tobytes()
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        w = self.weights(key_state)
        # zero waits are excluded: a sample at index i stands for the cell ((i-1) dt, i dt]
        w[0] = 0.0
        total = float(w.sum())
        if total * self.grid.dt < self.weight_floor:
            raise AllZeroWeights(
                f"waiting-time weights integrate to {total * self.grid.dt:.3e} < {self.weight_floor:.1e}"
            )
        cdf = np.cumsum(w) / total
        cdf[-1] = 1.0
        entry = (self.survival(key_state), cdf)
        if self._cache_size > 0:
            with self._lock:
                self._cache[key] = entry
                while len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
        return entry

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def check_index(self, index: int) -> int:
        if not 0 <= index < self.grid.n_points:
            raise GapExceedsTable(
                f"grid index {index} outside table of {self.grid.n_points} points (t_max={self.grid.t_max:g})"
            )
        return int(index)


@dataclass(eq=False)
class PrecomputedTables(_WtdTables):
    """No-jump propagators and WTD kernels on a uniform grid.

    Attributes:
        grid: The time grid.
        J: Monitored jump-rate operator; equals ``Q[0]``.
        Q: Array of shape ``(n_points, d, d)``, Hermitized.
        V: Array ``(n_points, d², d²)`` of propagators, or ``None`` when only
            power-of-two checkpoints are kept.
        checkpoints: ``E**(2**k)`` for ``k = 0, 1, ...``; used when ``V`` is None.
        survival_op: Operator ``S`` with ``tr(S rho)`` the survival probability at ``t_max``.
        survival_tail: Largest survival over non-dark basis states.
        dark_probes: Basis indices whose waiting-time mass is below ``weight_floor``.
    """

    grid: TimeGrid
    J: np.ndarray
    Q: np.ndarray
    V: np.ndarray | None
    checkpoints: list[np.ndarray]
    survival_op: np.ndarray
    survival_tail: float
    dark_probes: tuple[int, ...]
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    model_hash: str = ""
    cache_size: int = field(default=128, repr=False)

    def __post_init__(self):
        self._init_cache(self.cache_size)

    @property
    def storage(self) -> str:
        return "full" if self.V is not None else "checkpoints"

    def propagate_vec(self, index: int, vec: np.ndarray) -> np.ndarray:
        """Apply ``V[index]`` to a vectorized operator."""
        index = self.check_index(index)
        if self.V is not None:
            return self.V[index] @ vec
        out = vec
        k = 0
        while index:
            if index & 1:
                out = self.checkpoints[k] @ out
            index >>= 1
            k += 1
        return out

    def propagate(self, index: int, rho: np.ndarray) -> np.ndarray:
        """Unnormalized ``unvec(V[index] vec(rho))``."""
        d = rho.shape[0]
        return unvectorize(self.propagate_vec(index, vectorize(rho)), d)

    def propagator(self, index: int) -> np.ndarray:
        index = self.check_index(index)
        if self.V is not None:
            return self.V[index]
        out = identity(self.dim**2)
        k = 0
        while index:
            if index & 1:
                out = self.checkpoints[k] @ out
            index >>= 1
            k += 1
        return out

    def survival_curve(self, rho: np.ndarray) -> np.ndarray:
        """``Re tr(unvec(V[i] vec(rho)))`` for every grid index."""
        d = rho.shape[0]
        v = vectorize(rho)
        e_trace = vectorize(identity(d))
        if self.V is not None:
            return np.real(np.einsum("a,nab,b->n", e_trace, self.V, v))
        step = self.checkpoints[0]
        out = np.empty(self.grid.n_points)
        for i in range(self.grid.n_points):
            out[i] = np.real(e_trace @ v)
            v = step @ v
        return out


@dataclass(eq=False)
class PureTables(_WtdTables):
    """Tables for state-vector trajectories: ``U[i] = exp(-i H_e t_i)`` and the same ``Q``."""

    grid: TimeGrid
    J: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    survival_op: np.ndarray
    survival_tail: float
    dark_probes: tuple[int, ...]
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    model_hash: str = ""
    cache_size: int = field(default=128, repr=False)

    def __post_init__(self):
        self._init_cache(self.cache_size)

    storage = "pure"

    def propagate_pure(self, index: int, psi: np.ndarray) -> np.ndarray:
        return self.U[self.check_index(index)] @ psi

    def propagate(self, index: int, rho: np.ndarray) -> np.ndarray:
        U = self.U[self.check_index(index)]
        return U @ rho @ dag(U)

    def survival_curve(self, rho: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("nai,ij,naj->n", self.U.conj(), rho, self.U))


def _probe_summary(Q: np.ndarray, survival_op: np.ndarray, dt: float, weight_floor: float):
    masses = np.clip(np.real(np.einsum("nii->ni", Q)), 0, None).sum(axis=0) * dt
    dark = tuple(int(j) for j in np.flatnonzero(masses < weight_floor))
    surv = np.clip(np.real(np.diag(survival_op)), 0.0, 1.0)
    live = [j for j in range(len(surv)) if j not in dark]
    tail = float(surv[live].max()) if live else 0.0
    return tail, dark


def _chain_storage(storage: str, n_points: int, d: int, memory_budget: int) -> str:
    if storage == "auto":
        return "full" if n_points * d**4 * 16 <= memory_budget else "checkpoints"
    if storage not in ("full", "checkpoints"):
        raise ValueError(f"unknown storage mode '{storage}'")
    return storage


def build_tables(
    model: LindbladModel,
    grid: TimeGrid,
    *,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    storage: str = "auto",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    check_tail: bool = True,
    cache_size: int = 128,
) -> PrecomputedTables:
    """Tabulate ``V`` and ``Q`` on ``grid``.

    Args:
        model: A valid model; unmonitored channels enter ``L0``.
        grid: Uniform time grid.
        tail_tolerance: Largest survival probability at ``t_max`` accepted for
            any basis state that is not dark.
        weight_floor: Waiting-time mass below which a state counts as dark.
        storage: ``"full"`` keeps every ``V[i]``; ``"checkpoints"`` keeps
            ``E**(2**k)`` only; ``"auto"`` picks full storage when it fits in
            ``memory_budget`` bytes.
        check_tail: Raise when the tail exceeds ``tail_tolerance``.

    Raises:
        TailMassTooLarge: ``t_max`` too short for the slowest non-dark basis state.
    """
    d = model.dim
    L0, L0_adj = build_nojump_superoperator(model)
    J = jump_rate_operator(model)
    E = expm(L0 * grid.dt)
    E_adj = dag(E)
    n = grid.n_points
    mode = _chain_storage(storage, n, d, memory_budget)

    q_vecs = np.empty((n, d * d), dtype=np.complex128)
    q_vecs[0] = vectorize(J)
    s_vec = vectorize(identity(d))
    for i in range(1, n):
        q_vecs[i] = E_adj @ q_vecs[i - 1]
        s_vec = E_adj @ s_vec
    Q = hermitize(q_vecs.reshape(n, d, d).transpose(0, 2, 1))
    Q[0] = J
    survival_op = hermitize(unvectorize(s_vec, d))

    V = None
    checkpoints = [E]
    if mode == "full":
        V = np.empty((n, d * d, d * d), dtype=np.complex128)
        V[0] = identity(d * d)
        for i in range(1, n):
            V[i] = E @ V[i - 1]
    else:
        while 2 ** len(checkpoints) <= n - 1:
            checkpoints.append(checkpoints[-1] @ checkpoints[-1])

    tail, dark = _probe_summary(Q, survival_op, grid.dt, weight_floor)
    if check_tail and tail > tail_tolerance:
        raise TailMassTooLarge(tail, tail_tolerance, grid.t_max)
    return PrecomputedTables(
        grid=grid,
        J=J,
        Q=Q,
        V=V,
        checkpoints=checkpoints,
        survival_op=survival_op,
        survival_tail=tail,
        dark_probes=dark,
        tail_tolerance=tail_tolerance,
        weight_floor=weight_floor,
        model_hash=model_hash(model),
        cache_size=cache_size,
    )


def build_pure_tables(
    model: LindbladModel,
    grid: TimeGrid,
    *,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    check_tail: bool = True,
    cache_size: int = 128,
) -> PureTables:
    """Tables for :func:`~qgillespie.engine.run_trajectory_pure`; full monitoring only."""
    check(model)
    if not model.fully_monitored:
        raise PartialMonitoringUnsupported("pure-state tables need every jump channel monitored")
    d = model.dim
    J = jump_rate_operator(model)
    U1 = expm(-1j * effective_hamiltonian(model) * grid.dt)
    n = grid.n_points
    U = np.empty((n, d, d), dtype=np.complex128)
    U[0] = identity(d)
    for i in range(1, n):
        U[i] = U1 @ U[i - 1]
    Q = hermitize(np.einsum("nki,kl,nlj->nij", U.conj(), J, U))
    Q[0] = J
    survival_op = hermitize(dag(U[-1]) @ U[-1])
    tail, dark = _probe_summary(Q, survival_op, grid.dt, weight_floor)
    if check_tail and tail > tail_tolerance:
        raise TailMassTooLarge(tail, tail_tolerance, grid.t_max)
    return PureTables(
        grid=grid,
        J=J,
        Q=Q,
        U=U,
        survival_op=survival_op,
        survival_tail=tail,
        dark_probes=dark,
        tail_tolerance=tail_tolerance,
        weight_floor=weight_floor,
        model_hash=model_hash(model),
        cache_size=cache_size,
    )


def wtd_weights(tables: _WtdTables, rho, *, raise_if_dark: bool = True) -> np.ndarray:
    """Waiting-time density ``max(0, Re tr(Q[i] rho))`` on the grid.

    Raises:
        AllZeroWeights: if the weights integrate below ``tables.weight_floor``.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    w = tables.weights(rho)
    if raise_if_dark and w.sum() * tables.grid.dt < tables.weight_floor:
        raise AllZeroWeights(f"waiting-time weights integrate to {w.sum() * tables.grid.dt:.3e}")
    return w


def auto_dt(model: LindbladModel, factor: float = 20.0) -> float:
    """Grid spacing ``1 / (factor * max(||H||_2, ||J||_2))``."""
    scale = max(np.linalg.norm(model.hamiltonian, 2), np.linalg.norm(jump_rate_operator(model), 2))
    if scale == 0:
        raise TableError("model has zero Hamiltonian and zero jump rates")
    return 1.0 / (factor * scale)


def auto_grid(
    model: LindbladModel,
    dt: float | None = None,
    t_max: float | None = None,
    *,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    max_doublings: int = 16,
    max_points: int = 2_000_000,
) -> TimeGrid:
    """Choose a grid whose tail passes ``tail_tolerance``.

    ``dt`` defaults to :func:`auto_dt`. ``t_max`` starts at the given value (or
    ``10 / ||J||_2``) and doubles until the survival of every non-dark basis
    state drops below ``tail_tolerance``. Only the d⁴-per-step adjoint chain
    of the identity is propagated, not the full tables.

    Raises:
        TailMassTooLarge: when the cap is hit first.
    """
    dt = auto_dt(model) if dt is None else float(dt)
    if t_max is None:
        t_max = 10.0 / max(np.linalg.norm(jump_rate_operator(model), 2), 1e-300)
        t_max = max(t_max, 2 * dt)
    d = model.dim
    L0, _ = build_nojump_superoperator(model)
    E_adj = dag(expm(L0 * dt))
    s_vec = vectorize(identity(d))
    steps_done = 0
    target = TimeGrid.from_t_max(dt, t_max).n_points - 1
    for _ in range(max_doublings + 1):
        if target > max_points:
            break
        while steps_done < target:
            s_vec = E_adj @ s_vec
            steps_done += 1
        surv = np.clip(np.real(np.diag(unvectorize(s_vec, d))), 0.0, 1.0)
        live = surv[surv < 1.0 - weight_floor] if np.any(surv < 1.0 - weight_floor) else np.array([0.0])
        tail = float(live.max())
        if tail <= tail_tolerance:
            return TimeGrid(dt, steps_done + 1)
        target *= 2
    raise TailMassTooLarge(tail, tail_tolerance, steps_done * dt)


def auto_tables(model: LindbladModel, dt: float | None = None, t_max: float | None = None, **kwargs):
    """:func:`auto_grid` followed by :func:`build_tables`."""
    grid_kw = {k: kwargs[k] for k in ("tail_tolerance", "weight_floor") if k in kwargs}
    grid = auto_grid(model, dt, t_max, **grid_kw)
    return build_tables(model, grid, **kwargs)


def model_hash(model: LindbladModel) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(model.hamiltonian).tobytes())
    for group in (model.monitored_jumps, model.unmonitored_jumps):
        h.update(struct.pack("<I", len(group)))
        for op in group:
            h.update(np.ascontiguousarray(op).tobytes())
    return h.hexdigest()


def table_hash(model: LindbladModel, grid: TimeGrid, *, kind: str = "mixed", storage: str = "auto",
               tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
               weight_floor: float = DEFAULT_WEIGHT_FLOOR) -> str:
    """Key identifying a table build: model arrays, grid and build options."""
    h = hashlib.sha256(model_hash(model).encode())
    h.update(struct.pack("<dQdd", grid.dt, grid.n_points, tail_tolerance, weight_floor))
    h.update(f"{kind}:{storage}".encode())
    return h.hexdigest()


# On-disk format: fixed header followed by raw little-endian complex128 arrays.
_MAGIC = b"QGTB"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQdddBI64s")
_KINDS = {"full": 0, "checkpoints": 1, "pure": 2}


def save_tables(tables: PrecomputedTables | PureTables, path) -> None:
    path = Path(path)
    d = tables.dim
    n = tables.grid.n_points
    kind = tables.storage
    n_ck = len(tables.checkpoints) if kind == "checkpoints" else 0
    header = _HEADER.pack(
        _MAGIC, _VERSION, d, n, tables.grid.dt, tables.tail_tolerance, tables.weight_floor,
        _KINDS[kind], n_ck, tables.model_hash.encode().ljust(64, b"\0"),
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        for arr in (tables.J, tables.survival_op, tables.Q):
            fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())
        if kind == "full":
            fh.write(np.ascontiguousarray(tables.V, dtype="<c16").tobytes())
        elif kind == "checkpoints":
            for ck in tables.checkpoints:
                fh.write(np.ascontiguousarray(ck, dtype="<c16").tobytes())
        else:
            fh.write(np.ascontiguousarray(tables.U, dtype="<c16").tobytes())
    tmp.replace(path)


def load_tables(path, cache_size: int = 128) -> PrecomputedTables | PureTables:
    raw = Path(path).read_bytes()
    magic, version, d, n, dt, tail_tol, floor, kind, n_ck, mhash = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise TableError(f"{path} is not a table cache file (version {_VERSION})")
    offset = _HEADER.size

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<c16", count=count, offset=offset).reshape(shape)
        offset += count * 16
        return arr.astype(np.complex128)

    grid = TimeGrid(dt, n)
    J = take((d, d))
    survival_op = take((d, d))
    Q = take((n, d, d))
    tail, dark = _probe_summary(Q, survival_op, dt, floor)
    common = dict(grid=grid, J=J, Q=Q, survival_op=survival_op, survival_tail=tail, dark_probes=dark,
                  tail_tolerance=tail_tol, weight_floor=floor,
                  model_hash=mhash.rstrip(b"\0").decode(), cache_size=cache_size)
    if kind == _KINDS["pure"]:
        return PureTables(U=take((n, d, d)), **common)
    if kind == _KINDS["full"]:
        V = take((n, d * d, d * d))
        return PrecomputedTables(V=V, checkpoints=[V[1]], **common)
    checkpoints = [take((d * d, d * d)) for _ in range(n_ck)]
    return PrecomputedTables(V=None, checkpoints=checkpoints, **common)


def cached_tables(model: LindbladModel, grid: TimeGrid, cache_dir=None, *, pure: bool = False, **kwargs):
    """Build tables, reusing a cache file in ``cache_dir`` keyed by :func:`table_hash`."""
    builder = build_pure_tables if pure else build_tables
    if cache_dir is None:
        return builder(model, grid, **kwargs)
    key_kw = {k: kwargs[k] for k in ("tail_tolerance", "weight_floor") if k in kwargs}
    storage = "pure" if pure else kwargs.get("storage", "auto")
    key = table_hash(model, grid, kind="pure" if pure else "mixed", storage=storage, **key_kw)
    path = Path(cache_dir) / f"tables-{key[:32]}.qgt"
    if path.exists():
        tables = load_tables(path, cache_size=kwargs.get("cache_size", 128))
        if kwargs.get("check_tail", True) and tables.survival_tail > tables.tail_tolerance:
            raise TailMassTooLarge(tables.survival_tail, tables.tail_tolerance, grid.t_max)
        return tables
    tables = builder(model, grid, **kwargs)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_tables(tables, path)
    return tables
