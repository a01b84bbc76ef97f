from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from qgillespie.config import load_config, parse_config
from qgillespie.errors import ConfigError, ParseError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """
[model]
builder = "resonant_fluorescence"
[model.params]
delta = 0.0
omega = 0.5
gamma = 0.5
[run]
t_f = 10.0
n_traj = 5
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.mode == "gillespie" and cfg.seed is None
    assert cfg.dt is None and cfg.t_max is None and cfg.tail_tolerance == 1e-3
    assert cfg.initial_state == {"basis": 0} and cfg.fill_times is None
    assert cfg.outputs["jumps"] == "jumps.csv"
    m = cfg.build_model()
    assert m.dim == 2
    assert np.allclose(cfg.initial(m), np.diag([1, 0]))


def test_negative_gamma_names_field():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("gamma = 0.5", "gamma = -0.5"))
    assert "model.params.gamma" in str(info.value)
    assert info.value.line == 7


def test_fig1_config():
    cfg = load_config(CONFIGS / "fig1_resonant_fluorescence.toml")
    assert cfg.model["params"] == {"delta": 0.0, "omega": 0.5, "gamma": 0.5}
    assert cfg.n_traj == 1000 and cfg.t_f == 200.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_parse_and_build(path):
    cfg = load_config(path)
    model = cfg.build_model()
    cfg.initial(model)
    if cfg.fill_times is not None:
        cfg.observable_ops(model)


def test_unknown_key_is_parse_error_with_line():
    with pytest.raises(ParseError) as info:
        parse_config(MINIMAL + "bogus = 1\n")
    assert info.value.field == "run.bogus" and info.value.line == 11
    with pytest.raises(ParseError):
        parse_config(MINIMAL + "[extra]\n")
    with pytest.raises(ParseError):
        parse_config("[model\n")
    with pytest.raises(ParseError, match="missing"):
        parse_config('[model]\nbuilder = "kerr"\n')


@pytest.mark.parametrize(
    "old,new,field",
    [
        ("t_f = 10.0", "t_f = -1.0", "run.t_f"),
        ("n_traj = 5", "n_traj = 2.5", "run.n_traj"),
        ("n_traj = 5", 'n_traj = 5\nmode = "fast"', "run.mode"),
        ("omega = 0.5", "omega = nan", "model.params.omega"),
        ("omega = 0.5", "omega = 0.5\nextra = 1", "model.params.extra"),
        ('builder = "resonant_fluorescence"', 'builder = "nope"', "model.builder"),
    ],
)
def test_invalid_values(old, new, field):
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace(old, new))
    assert info.value.field == field


def test_mode_requirements():
    text = MINIMAL + 'mode = "gillespie-pure"\n[initial_state]\nmatrix = [[1, 0], [0, 0]]\n'
    with pytest.raises(ConfigError, match="pure"):
        parse_config(text)
    with pytest.raises(ConfigError, match="mcw"):
        parse_config(MINIMAL + 'mode = "mcw"\n[fill]\ntimes = {uniform = 0.1}\n')


def test_explicit_matrices_and_states():
    text = """
[model]
hamiltonian = [[0, 0.5], [0.5, 0]]
monitored_jumps = [[[0, 1], [0, 0]]]
[initial_state]
amplitudes = [[0.6, 0], [0, 0.8]]
[run]
t_f = 1.0
n_traj = 1
mode = "gillespie-pure"
"""
    cfg = parse_config(text)
    psi = cfg.initial(cfg.build_model())
    assert np.allclose(psi, [0.6, 0.8j])


def test_fill_times():
    cfg = parse_config(MINIMAL + "[fill]\ntimes = {uniform = 2.5}\nobservables = ['sigma_z']\n")
    assert np.allclose(cfg.fill_time_array(), [0, 2.5, 5, 7.5, 10])
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "[fill]\ntimes = [0.0, 11.0]\n")
    bad = parse_config(MINIMAL + "[fill]\ntimes = [1.0]\nobservables = ['n1']\n")
    with pytest.raises(ConfigError, match="unknown observable"):
        bad.observable_ops(bad.build_model())


def test_echo_roundtrip_and_manifest():
    cfg = parse_config(MINIMAL)
    cfg.seed = 42
    echo = cfg.to_dict()
    again = parse_config(echo)
    assert again.to_dict() == echo
    manifest = json.dumps({"config": echo, "code_version": "x", "seed": 42})
    assert parse_config(manifest).seed == 42
