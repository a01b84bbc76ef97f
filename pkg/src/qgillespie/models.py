"""GKSL master equations with monitored and unmonitored jump channels.

A model is the Hamiltonian ``H`` plus two ordered lists of jump operators:
the monitored ones (detector clicks, they define the waiting-time
distribution) and the unmonitored ones (they only mix the no-jump evolution).

Conventions: hbar = 1; for a qubit ``|g> = index 0`` and ``|e> = index 1``;
``sigma_minus = |g><e|`` so that ``gamma`` in ``sqrt(gamma) * sigma_minus`` is
the population decay rate; multi-qubit spaces are ordered qubit-1 ⊗ qubit-2.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, InvalidStateError, ModelError
from .operators import dag, identity, is_hermitian

__all__ = [
    "LindbladModel",
    "validate",
    "effective_hamiltonian",
    "jump_rate_operator",
    "build_resonant_fluorescence",
    "build_double_qubit",
    "build_charge_qubit",
    "build_kerr",
    "build_classical_rate_model",
    "BUILDERS",
    "build_from_name",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "annihilation",
    "basis_density",
    "basis_vector",
    "as_density",
    "as_pure",
    "density_violations",
    "check_density",
    "check_pure",
]

HERMITIAN_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
# sigma_z |e> = +|e> with |e> at index 1
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_PLUS = SIGMA_MINUS.conj().T.copy()


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus monitored and unmonitored jump operators.

    Arrays are copied and made read-only on construction, so a model can be
    shared between threads. Use :func:`validate` to check it.
    """

    hamiltonian: np.ndarray
    monitored_jumps: tuple[np.ndarray, ...]
    unmonitored_jumps: tuple[np.ndarray, ...] = ()
    labels: tuple[str, ...] | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", _frozen(self.hamiltonian))
        object.__setattr__(self, "monitored_jumps", tuple(_frozen(L) for L in self.monitored_jumps))
        object.__setattr__(self, "unmonitored_jumps", tuple(_frozen(S) for S in self.unmonitored_jumps))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(f"L{k}" for k in range(len(self.monitored_jumps))))
        else:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.monitored_jumps)

    @property
    def fully_monitored(self) -> bool:
        return len(self.unmonitored_jumps) == 0

    def to_dict(self) -> dict:
        """Plain-data representation; complex entries become ``[re, im]`` pairs."""
        return {
            "name": self.name,
            "params": {k: _encode_scalar(v) for k, v in self.params.items()},
            "hamiltonian": encode_matrix(self.hamiltonian),
            "monitored_jumps": [encode_matrix(L) for L in self.monitored_jumps],
            "unmonitored_jumps": [encode_matrix(S) for S in self.unmonitored_jumps],
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LindbladModel":
        return cls(
            hamiltonian=decode_matrix(data["hamiltonian"]),
            monitored_jumps=tuple(decode_matrix(m) for m in data.get("monitored_jumps", [])),
            unmonitored_jumps=tuple(decode_matrix(m) for m in data.get("unmonitored_jumps", [])),
            labels=data.get("labels"),
            name=data.get("name", "custom"),
            params={k: _decode_scalar(v) for k, v in data.get("params", {}).items()},
        )


def _encode_scalar(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return encode_matrix(v) if v.ndim == 2 else v.tolist()
    return v


def _decode_scalar(v):
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    return v


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    """Inverse of :func:`encode_matrix`; plain real entries are accepted too."""
    rows = []
    for row in data:
        out = []
        for z in row:
            if isinstance(z, (list, tuple)):
                if len(z) != 2:
                    raise ModelError(f"complex entry must be [re, im], got {z!r}")
                out.append(complex(float(z[0]), float(z[1])))
            else:
                out.append(complex(z))
        rows.append(out)
    arr = np.array(rows, dtype=np.complex128)
    if arr.ndim != 2:
        raise ModelError("matrix rows have inconsistent lengths")
    return arr


def validate(model: LindbladModel) -> list[str]:
    """Return a list of human-readable violations; empty means the model is valid."""
    problems = []
    H = model.hamiltonian
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        return [f"Hamiltonian must be square, got shape {H.shape}"]
    d = H.shape[0]
    if not np.all(np.isfinite(H)):
        problems.append("non-finite entries in H")
    elif not is_hermitian(H, HERMITIAN_TOL):
        problems.append("non-Hermitian H")
    if not model.monitored_jumps:
        problems.append("no monitored jump operators")
    for kind, ops in (("monitored", model.monitored_jumps), ("unmonitored", model.unmonitored_jumps)):
        for k, L in enumerate(ops):
            if L.shape != (d, d):
                problems.append(f"{kind} jump {k} has shape {L.shape}, expected {(d, d)}")
            elif not np.all(np.isfinite(L)):
                problems.append(f"{kind} jump {k} has non-finite entries")
    if len(model.labels) != len(model.monitored_jumps):
        problems.append("number of labels does not match monitored jumps")
    return problems


def check(model: LindbladModel) -> LindbladModel:
    problems = validate(model)
    if problems:
        raise ModelError("; ".join(problems))
    return model


def jump_rate_operator(model: LindbladModel) -> np.ndarray:
    """Sum of ``L^† L`` over the monitored channels only."""
    J = np.zeros((model.dim, model.dim), dtype=np.complex128)
    for L in model.monitored_jumps:
        J += dag(L) @ L
    return J


def effective_hamiltonian(model: LindbladModel) -> np.ndarray:
    """``H - (i/2) Σ L^† L`` over the monitored channels.

    Only generates the no-jump evolution when every channel is monitored.
    """
    return model.hamiltonian - 0.5j * jump_rate_operator(model)


def _require_positive(name: str, value: float):
    if not np.isfinite(value) or value <= 0:
        raise ModelError(f"{name} must be positive, got {value}")


def build_resonant_fluorescence(delta: float, omega: float, gamma: float) -> LindbladModel:
    """Driven two-level atom with H = delta σz + omega σx, monitored decay ``sqrt(gamma) σ-``."""
    _require_positive("gamma", gamma)
    H = delta * SIGMA_Z + omega * SIGMA_X
    return LindbladModel(
        H,
        (np.sqrt(gamma) * SIGMA_MINUS,),
        labels=("emission",),
        name="resonant_fluorescence",
        params={"delta": delta, "omega": omega, "gamma": gamma},
    )


def _two_qubit(op, site: int) -> np.ndarray:
    eye = identity(2)
    return np.kron(op, eye) if site == 0 else np.kron(eye, op)


def build_double_qubit(omega: float, g: float, gamma: float) -> LindbladModel:
    """Qubit 1 driven, exchange-coupled to qubit 2 which decays at rate ``gamma``."""
    _require_positive("gamma", gamma)
    s1m, s2m = _two_qubit(SIGMA_MINUS, 0), _two_qubit(SIGMA_MINUS, 1)
    H = omega * _two_qubit(SIGMA_X, 0) + g * (dag(s1m) @ s2m + s1m @ dag(s2m))
    return LindbladModel(
        H,
        (np.sqrt(gamma) * s2m,),
        labels=("qubit2_emission",),
        name="double_qubit",
        params={"omega": omega, "g": g, "gamma": gamma},
    )


def build_charge_qubit(
    omega1: float, omega2: float, omega: float, tunnel: float, chi: float
) -> LindbladModel:
    """Double quantum dot read out by a point contact.

    The monitored operator is ``tunnel * I + chi * n1`` with ``n1`` the
    occupation of dot 1; the scalar tunnelling amplitude multiplies identity.
    """
    s1m, s2m = _two_qubit(SIGMA_MINUS, 0), _two_qubit(SIGMA_MINUS, 1)
    n1, n2 = dag(s1m) @ s1m, dag(s2m) @ s2m
    H = omega1 * n1 + omega2 * n2 + omega * (dag(s1m) @ s2m + s1m @ dag(s2m))
    L = tunnel * identity(4) + chi * n1
    return LindbladModel(
        H,
        (L,),
        labels=("detector_click",),
        name="charge_qubit",
        params={"omega1": omega1, "omega2": omega2, "omega": omega, "tunnel": tunnel, "chi": chi},
    )


def annihilation(n_max: int) -> np.ndarray:
    """Truncated bosonic lowering operator on Fock states ``0..n_max``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(np.complex128)


def build_kerr(
    delta: float, U: float, F: complex, gamma: float, n_max: int = 15
) -> LindbladModel:
    """Driven Kerr cavity ``Δ a†a + (U/2) a†a†aa + F* a† + F a`` with photon loss ``sqrt(gamma) a``."""
    _require_positive("gamma", gamma)
    if int(n_max) != n_max or n_max < 2:
        raise ModelError(f"n_max must be an integer >= 2, got {n_max}")
    n_max = int(n_max)
    a = annihilation(n_max)
    ad = dag(a)
    F = complex(F)
    H = delta * ad @ a + 0.5 * U * ad @ ad @ a @ a + np.conj(F) * ad + F * a
    params = {"delta": delta, "U": U, "F": F if F.imag else F.real, "gamma": gamma, "n_max": n_max}
    return LindbladModel(H, (np.sqrt(gamma) * a,), labels=("photon",), name="kerr", params=params)


def build_classical_rate_model(W) -> LindbladModel:
    """Pauli rate equation as a jump model; ``W[i, j]`` is the rate for ``j -> i``."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ModelError(f"rate matrix must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ModelError("rate matrix has non-finite entries")
    if np.any(W < 0):
        raise ModelError("negative transition rates")
    if np.any(np.diag(W) != 0):
        raise ModelError("rate matrix must have a zero diagonal")
    d = W.shape[0]
    jumps, labels = [], []
    for j in range(d):
        for i in range(d):
            if i != j and W[i, j] > 0:
                L = np.zeros((d, d), dtype=np.complex128)
                L[i, j] = np.sqrt(W[i, j])
                jumps.append(L)
                labels.append(f"{j}->{i}")
    if not jumps:
        raise ModelError("rate matrix has no positive transition rates")
    return LindbladModel(
        np.zeros((d, d), dtype=np.complex128),
        tuple(jumps),
        labels=tuple(labels),
        name="classical_rate_model",
        params={"W": W.tolist()},
    )


BUILDERS: dict[str, Callable[..., LindbladModel]] = {
    "resonant_fluorescence": build_resonant_fluorescence,
    "double_qubit": build_double_qubit,
    "charge_qubit": build_charge_qubit,
    "kerr": build_kerr,
    "classical_rate_model": build_classical_rate_model,
}


def builder_parameters(name: str) -> inspect.Signature:
    return inspect.signature(BUILDERS[name])


def build_from_name(name: str, params: dict) -> LindbladModel:
    """Call a registered builder with keyword parameters."""
    if name not in BUILDERS:
        raise ModelError(f"unknown model builder '{name}'; choose from {sorted(BUILDERS)}")
    sig = builder_parameters(name)
    unknown = set(params) - set(sig.parameters)
    if unknown:
        raise ModelError(f"unknown parameters for {name}: {sorted(unknown)}")
    missing = [p for p, spec in sig.parameters.items() if spec.default is inspect.Parameter.empty and p not in params]
    if missing:
        raise ModelError(f"missing parameters for {name}: {missing}")
    return BUILDERS[name](**params)


# States are plain arrays: (d, d) density matrices or (d,) amplitude vectors.

def basis_vector(d: int, i: int) -> np.ndarray:
    if not 0 <= i < d:
        raise DimensionError(f"basis index {i} out of range for dimension {d}")
    v = np.zeros(d, dtype=np.complex128)
    v[i] = 1.0
    return v


def basis_density(d: int, i: int) -> np.ndarray:
    v = basis_vector(d, i)
    return np.outer(v, v.conj())


def as_pure(psi, d: int | None = None) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if d is not None and psi.size != d:
        raise DimensionError(f"state vector has length {psi.size}, expected {d}")
    check_pure(psi)
    return psi


def as_density(state, d: int | None = None) -> np.ndarray:
    """Coerce a vector, matrix or basis index into a validated density matrix."""
    if isinstance(state, (int, np.integer)):
        if d is None:
            raise DimensionError("dimension needed to build a basis state")
        return basis_density(d, int(state))
    arr = np.asarray(state, dtype=np.complex128)
    if arr.ndim == 1:
        psi = as_pure(arr, d)
        return np.outer(psi, psi.conj())
    if d is not None and arr.shape != (d, d):
        raise DimensionError(f"density matrix has shape {arr.shape}, expected {(d, d)}")
    check_density(arr)
    return arr.copy()


def density_violations(
    rho, herm_tol: float = 1e-10, trace_tol: float = 1e-10, eig_tol: float = 1e-9
) -> list[str]:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"not a square matrix: shape {rho.shape}"]
    if not np.all(np.isfinite(rho)):
        return ["non-finite entries"]
    problems = []
    if not is_hermitian(rho, herm_tol):
        problems.append("not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        problems.append(f"trace {tr:.12g} != 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam[0] < -eig_tol:
        problems.append(f"negative eigenvalue {lam[0]:.3e}")
    return problems


def check_density(rho, **tols) -> None:
    problems = density_violations(rho, **tols)
    if problems:
        raise InvalidStateError("invalid density matrix: " + "; ".join(problems))


def check_pure(psi, tol: float = 1e-10) -> None:
    psi = np.asarray(psi)
    if not np.all(np.isfinite(psi)):
        raise InvalidStateError("state vector has non-finite entries")
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > tol:
        raise InvalidStateError(f"state vector norm {norm:.12g} != 1")


def top_level_population(rho, levels: int = 2) -> float:
    """Population in the highest ``levels`` basis states (Fock truncation diagnostic)."""
    diag = np.real(np.diag(np.asarray(rho)))
    return float(np.sum(diag[-levels:]))


def expectation(op, state) -> float:
    """``Re tr(op rho)`` for a density matrix, or ``Re <psi|op|psi>`` for a vector."""
    state = np.asarray(state)
    if state.ndim == 1:
        return float(np.real(np.vdot(state, op @ state)))
    return float(np.real(np.einsum("ij,ji->", op, state)))

