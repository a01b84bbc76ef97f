"""Run configuration: TOML schema, defaults and validation.

Grammar (TOML; every section except ``[model]`` and ``[run]`` is optional)::

    [model]
    builder = "resonant_fluorescence"   # or omit and give explicit matrices:
    # hamiltonian = [[[re, im], ...], ...]
    # monitored_jumps = [<matrix>, ...]
    # unmonitored_jumps = [<matrix>, ...]
    # labels = ["emission"]

    [model.params]                      # keyword arguments of the builder
    delta = 0.0
    omega = 0.5
    gamma = 0.5

    [initial_state]                     # exactly one of:
    basis = 0                           # computational basis index (default 0)
    # amplitudes = [[re, im], ...]      # or plain reals
    # matrix = <matrix>

    [grid]
    dt = "auto"                         # float or "auto"
    t_max = "auto"                      # float or "auto"
    tail_tolerance = 1e-3
    storage = "auto"                    # auto | full | checkpoints

    [run]
    t_f = 200.0
    n_traj = 1000
    seed = 1234                         # generated and echoed when omitted
    mode = "gillespie"                  # gillespie | gillespie-pure | mcw
    dt_mcw = 1e-3                       # mcw mode only
    workers = 1

    [fill]
    times = "none"                      # "none", {uniform = 0.1} or [0.0, 0.5, ...]
    observables = ["population:0"]      # see builtin_observable()

    [fill.matrices]                     # extra named observables
    # my_op = <matrix>

    [output]
    bins = 40                           # int or explicit edge list
    jumps = "jumps.csv"
    histogram = "wtd_histogram.csv"
    observables = "observables.csv"
    manifest = "manifest.json"

A matrix is a list of rows; each entry is a real number or ``[re, im]``.
"""

from __future__ import annotations

import inspect
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, ModelError, ParseError
from .models import (
    BUILDERS,
    SIGMA_X,
    SIGMA_Z,
    LindbladModel,
    annihilation,
    as_density,
    as_pure,
    build_from_name,
    decode_matrix,
    validate,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["RunConfig", "parse_config", "load_config", "MODES"]

MODES = ("gillespie", "gillespie-pure", "mcw")

_SCHEMA = {
    "model": {"builder", "params", "hamiltonian", "monitored_jumps", "unmonitored_jumps", "labels"},
    "initial_state": {"basis", "amplitudes", "matrix"},
    "grid": {"dt", "t_max", "tail_tolerance", "storage"},
    "run": {"t_f", "n_traj", "seed", "mode", "dt_mcw", "workers"},
    "fill": {"times", "observables", "matrices"},
    "output": {"bins", "jumps", "histogram", "observables", "manifest"},
}
_REQUIRED = ("model", "run")


@dataclass
class RunConfig:
    """Validated run configuration with defaults applied."""

    model: dict
    t_f: float
    n_traj: int
    initial_state: dict = field(default_factory=lambda: {"basis": 0})
    dt: float | None = None
    t_max: float | None = None
    tail_tolerance: float = 1e-3
    storage: str = "auto"
    seed: int | None = None
    mode: str = "gillespie"
    dt_mcw: float = 1e-3
    workers: int = 1
    fill_times: Any = None  # None | {"uniform": step} | list of floats
    observables: list = field(default_factory=list)
    observable_matrices: dict = field(default_factory=dict)
    bins: Any = 40
    outputs: dict = field(
        default_factory=lambda: {
            "jumps": "jumps.csv",
            "histogram": "wtd_histogram.csv",
            "observables": "observables.csv",
            "manifest": "manifest.json",
        }
    )

    def build_model(self) -> LindbladModel:
        spec = self.model
        try:
            if "builder" in spec:
                model = build_from_name(spec["builder"], _builder_params(spec))
            else:
                model = LindbladModel(
                    hamiltonian=decode_matrix(spec["hamiltonian"]),
                    monitored_jumps=tuple(decode_matrix(m) for m in spec.get("monitored_jumps", [])),
                    unmonitored_jumps=tuple(decode_matrix(m) for m in spec.get("unmonitored_jumps", [])),
                    labels=spec.get("labels"),
                )
        except ModelError as exc:
            raise ConfigError(str(exc), field="model") from exc
        problems = validate(model)
        if problems:
            raise ConfigError("; ".join(problems), field="model")
        return model

    def initial(self, model: LindbladModel) -> np.ndarray:
        """Initial state: a vector for pure mode, otherwise a density matrix."""
        spec = self.initial_state
        d = model.dim
        try:
            if "basis" in spec:
                idx = int(spec["basis"])
                if not 0 <= idx < d:
                    raise ConfigError(f"basis index {idx} out of range for dimension {d}", field="initial_state.basis")
                psi = np.zeros(d, dtype=np.complex128)
                psi[idx] = 1
                return psi if self.mode == "gillespie-pure" else as_density(psi, d)
            if "amplitudes" in spec:
                psi = np.array([_complex(z) for z in spec["amplitudes"]], dtype=np.complex128)
                psi = as_pure(psi, d)
                return psi if self.mode == "gillespie-pure" else as_density(psi, d)
            rho = as_density(decode_matrix(spec["matrix"]), d)
        except ConfigError:
            raise
        except (ValueError, ModelError) as exc:
            raise ConfigError(str(exc), field="initial_state") from exc
        if self.mode == "gillespie-pure":
            raise ConfigError("pure mode needs a basis or amplitudes initial state", field="initial_state")
        return rho

    def fill_time_array(self) -> np.ndarray | None:
        if self.fill_times is None:
            return None
        if isinstance(self.fill_times, dict):
            step = float(self.fill_times["uniform"])
            n = int(math.floor(self.t_f / step + 1e-9))
            return np.arange(n + 1) * step
        return np.asarray(self.fill_times, dtype=float)

    def observable_ops(self, model: LindbladModel) -> dict[str, np.ndarray]:
        ops = {}
        for name in self.observables:
            ops[name] = builtin_observable(model, name)
        for name, mat in self.observable_matrices.items():
            op = decode_matrix(mat)
            if op.shape != (model.dim, model.dim):
                raise ConfigError(f"observable has shape {op.shape}", field=f"fill.matrices.{name}")
            ops[name] = op
        return ops

    def to_dict(self) -> dict:
        """Plain data in the same schema :func:`parse_config` accepts."""
        grid = {"dt": "auto" if self.dt is None else self.dt,
                "t_max": "auto" if self.t_max is None else self.t_max,
                "tail_tolerance": self.tail_tolerance, "storage": self.storage}
        run = {"t_f": self.t_f, "n_traj": self.n_traj, "mode": self.mode,
               "dt_mcw": self.dt_mcw, "workers": self.workers}
        if self.seed is not None:
            run["seed"] = self.seed
        fill = {"times": "none" if self.fill_times is None else self.fill_times,
                "observables": list(self.observables)}
        if self.observable_matrices:
            fill["matrices"] = dict(self.observable_matrices)
        return {
            "model": _jsonable(self.model),
            "initial_state": _jsonable(self.initial_state),
            "grid": grid,
            "run": run,
            "fill": fill,
            "output": {"bins": self.bins, **self.outputs},
        }


def _jsonable(obj):
    return json.loads(json.dumps(obj))


def _complex(z) -> complex:
    if isinstance(z, (list, tuple)):
        if len(z) != 2:
            raise ConfigError(f"complex entry must be [re, im], got {z!r}")
        return complex(float(z[0]), float(z[1]))
    return complex(z)


def _builder_params(spec: dict) -> dict:
    params = {}
    for key, value in spec.get("params", {}).items():
        if isinstance(value, list) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value) \
                and spec["builder"] != "classical_rate_model":
            params[key] = complex(value[0], value[1])
        else:
            params[key] = value
    return params


def builtin_observable(model: LindbladModel, name: str) -> np.ndarray:
    """Named observables: ``population:<i>``, ``sigma_z``/``sigma_x`` (qubits),
    ``n1``/``n2``/``z_c`` (two qubits; ``z_c = n1 - n2``), ``number`` (Kerr)."""
    d = model.dim
    if name.startswith("population:"):
        i = int(name.split(":", 1)[1])
        if not 0 <= i < d:
            raise ConfigError(f"population index {i} out of range", field="fill.observables")
        op = np.zeros((d, d), dtype=np.complex128)
        op[i, i] = 1
        return op
    if d == 2 and name in ("sigma_z", "sigma_x", "excited"):
        return {"sigma_z": SIGMA_Z, "sigma_x": SIGMA_X, "excited": np.diag([0, 1]).astype(np.complex128)}[name]
    if d == 4 and name in ("n1", "n2", "z_c"):
        n1 = np.diag([0, 0, 1, 1]).astype(np.complex128)
        n2 = np.diag([0, 1, 0, 1]).astype(np.complex128)
        return {"n1": n1, "n2": n2, "z_c": n1 - n2}[name]
    if name == "number":
        a = annihilation(d - 1)
        return a.conj().T @ a
    raise ConfigError(f"unknown observable '{name}' for a {d}-dimensional model", field="fill.observables")


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=|^\s*\[{re.escape(key)}\]")
    for n, line in enumerate(text.splitlines(), start=1):
        if pattern.search(line):
            return n
    return None


def _number(section: dict, key: str, where: str, text, *, positive=False, integer=False, allow_auto=False):
    value = section[key]
    if allow_auto and value == "auto":
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=f"{where}.{key}", line=_line_of(text, key))
    if not math.isfinite(value):
        raise ConfigError("must be finite", field=f"{where}.{key}", line=_line_of(text, key))
    if integer and int(value) != value:
        raise ConfigError("must be an integer", field=f"{where}.{key}", line=_line_of(text, key))
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value}", field=f"{where}.{key}", line=_line_of(text, key))
    return int(value) if integer else float(value)


def parse_config(source: str | dict) -> RunConfig:
    """Parse TOML text (or an already-decoded mapping) into a :class:`RunConfig`.

    A JSON run manifest is accepted too; its ``config`` entry is used.

    Raises:
        ParseError: syntax errors, unknown sections or keys, missing sections.
        ConfigError: invalid values. Both name the field and, for text
            input, the line.
    """
    text = None
    if isinstance(source, str):
        text = source
        stripped = source.lstrip()
        if stripped.startswith("{"):
            try:
                data = json.loads(source)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        else:
            try:
                data = tomllib.loads(source)
            except tomllib.TOMLDecodeError as exc:
                raise ParseError(f"invalid TOML: {exc}") from exc
    else:
        data = dict(source)
    if "config" in data and "code_version" in data:
        data = data["config"]

    for section in data:
        if section not in _SCHEMA:
            raise ParseError("unknown section", field=section, line=_line_of(text, section))
    for section in _REQUIRED:
        if section not in data:
            raise ParseError("missing required section", field=section)
    for section, body in data.items():
        if not isinstance(body, dict):
            raise ParseError("expected a table", field=section, line=_line_of(text, section))
        for key in body:
            if key not in _SCHEMA[section]:
                raise ParseError("unknown key", field=f"{section}.{key}", line=_line_of(text, key))

    model = dict(data["model"])
    if "builder" in model:
        if model["builder"] not in BUILDERS:
            raise ConfigError(f"unknown builder '{model['builder']}'", field="model.builder",
                              line=_line_of(text, "builder"))
        if "hamiltonian" in model:
            raise ConfigError("give either a builder or explicit matrices", field="model")
        _check_builder_params(model, text)
    elif "hamiltonian" not in model or "monitored_jumps" not in model:
        raise ConfigError("needs 'builder' or 'hamiltonian' plus 'monitored_jumps'", field="model")

    run = data["run"]
    for key in ("t_f", "n_traj"):
        if key not in run:
            raise ConfigError("missing required key", field=f"run.{key}")
    cfg = RunConfig(
        model=model,
        t_f=_number(run, "t_f", "run", text, positive=True),
        n_traj=_number(run, "n_traj", "run", text, positive=True, integer=True),
    )
    if "seed" in run:
        seed = _number(run, "seed", "run", text, integer=True)
        if seed < 0:
            raise ConfigError("must be non-negative", field="run.seed", line=_line_of(text, "seed"))
        cfg.seed = seed
    if "mode" in run:
        if run["mode"] not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", field="run.mode", line=_line_of(text, "mode"))
        cfg.mode = run["mode"]
    if "dt_mcw" in run:
        cfg.dt_mcw = _number(run, "dt_mcw", "run", text, positive=True)
    if "workers" in run:
        cfg.workers = _number(run, "workers", "run", text, positive=True, integer=True)

    state = data.get("initial_state", {"basis": 0})
    if len(state) != 1:
        raise ConfigError("give exactly one of basis, amplitudes, matrix", field="initial_state")
    if "basis" in state:
        _number(state, "basis", "initial_state", text, integer=True)
    cfg.initial_state = dict(state)

    grid = data.get("grid", {})
    if "dt" in grid:
        cfg.dt = _number(grid, "dt", "grid", text, positive=True, allow_auto=True)
    if "t_max" in grid:
        cfg.t_max = _number(grid, "t_max", "grid", text, positive=True, allow_auto=True)
    if "tail_tolerance" in grid:
        cfg.tail_tolerance = _number(grid, "tail_tolerance", "grid", text, positive=True)
    if "storage" in grid:
        if grid["storage"] not in ("auto", "full", "checkpoints"):
            raise ConfigError("storage must be auto, full or checkpoints", field="grid.storage")
        cfg.storage = grid["storage"]

    fill = data.get("fill", {})
    times = fill.get("times", "none")
    if times == "none":
        cfg.fill_times = None
    elif isinstance(times, dict):
        if set(times) != {"uniform"}:
            raise ConfigError("expected {uniform = step}", field="fill.times", line=_line_of(text, "times"))
        _number(times, "uniform", "fill.times", text, positive=True)
        cfg.fill_times = {"uniform": float(times["uniform"])}
    elif isinstance(times, list):
        arr = np.asarray(times, dtype=float)
        if arr.size and (np.any(~np.isfinite(arr)) or arr.min() < 0 or arr.max() > cfg.t_f):
            raise ConfigError("fill times must lie in [0, t_f]", field="fill.times", line=_line_of(text, "times"))
        cfg.fill_times = [float(x) for x in arr]
    else:
        raise ConfigError("expected \"none\", {uniform = step} or a list", field="fill.times")
    cfg.observables = list(fill.get("observables", []))
    cfg.observable_matrices = dict(fill.get("matrices", {}))

    out = data.get("output", {})
    if "bins" in out:
        bins = out["bins"]
        if isinstance(bins, list):
            if len(bins) < 2 or np.any(np.diff(bins) <= 0):
                raise ConfigError("bin edges must be increasing", field="output.bins")
        else:
            _number(out, "bins", "output", text, positive=True, integer=True)
        cfg.bins = bins
    for key in ("jumps", "histogram", "observables", "manifest"):
        if key in out:
            cfg.outputs[key] = str(out[key])

    _check_mode(cfg)
    return cfg


def _check_builder_params(model: dict, text):
    sig = inspect.signature(BUILDERS[model["builder"]])
    params = model.get("params", {})
    for key, value in params.items():
        if key not in sig.parameters:
            raise ConfigError("unknown parameter", field=f"model.params.{key}", line=_line_of(text, key))
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            if not math.isfinite(value):
                raise ConfigError("must be finite", field=f"model.params.{key}", line=_line_of(text, key))
            if key in ("gamma",) and value <= 0:
                raise ConfigError(f"must be positive, got {value}", field=f"model.params.{key}",
                                  line=_line_of(text, key))
    for name, p in sig.parameters.items():
        if p.default is inspect.Parameter.empty and name not in params:
            raise ConfigError("missing builder parameter", field=f"model.params.{name}")


def _check_mode(cfg: RunConfig):
    if cfg.mode == "gillespie-pure":
        if "matrix" in cfg.initial_state:
            raise ConfigError("pure mode needs a pure initial state", field="initial_state")
        if cfg.model.get("unmonitored_jumps"):
            raise ConfigError("pure mode needs every channel monitored", field="model.unmonitored_jumps")
    if cfg.mode == "mcw":
        if cfg.model.get("unmonitored_jumps"):
            raise ConfigError("mcw mode treats every channel as monitored", field="model.unmonitored_jumps")
        if cfg.fill_times is not None:
            raise ConfigError("filling needs Gillespie tables; not available in mcw mode", field="fill.times")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

