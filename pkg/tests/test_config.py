import pytest

from landauer_cm.config import PRESETS, parse_config
from landauer_cm.errors import ConfigError
from landauer_cm.scenario import build_setup


def test_parse_basic_file():
    cfg = parse_config("# comment\nscenario = cascade\n\nsystem.n_qubits = 3  # trailing\n"
                       "bath.xi = 0.5\ncoupling.gamma = 2\nstate.initial = up, down, up\n")
    assert cfg.scenario == "cascade" and cfg.n_qubits == 3
    assert cfg.rate == 2.0 and cfg.horizon == pytest.approx(3.0)
    assert cfg.initial_state == ("up", "down", "up")
    assert build_setup(cfg).dims == (2, 2, 2)


@pytest.mark.parametrize("text,key,line", [
    ("scenario = single\nbath.xi = 0.5\nfoo = 1\n", "foo", 3),
    ("scenario = single\nscenario = cascade\n", "scenario", 2),
    ("scenario = single\nbath.xi = 0.5\nbath.beta = 1\ncoupling.gamma = 1\n", "bath.beta", 3),
    ("scenario = single\nbath.xi = 1.0\ncoupling.gamma = 1\n", "bath.xi", 2),
    ("scenario = cascade\nbath.xi = 0.5\ncoupling.gamma = 1\ncoupling.J = 0.1\n", "coupling.J", 4),
    ("scenario = indirect_qubit\nbath.beta = 1\ncoupling.gamma = 1\n", "coupling.gamma", 3),
    ("scenario = single\nbath.xi = 0.5\ncoupling.gamma = 1\ncoupling.g = 1\ncoupling.tau = 1\n",
     "coupling.gamma", 3),
    ("scenario = single\nbath.xi = 0.5\ncoupling.gamma = 1\nmode = discrete\n", "coupling.g", None),
    ("scenario = single\nbath.xi = 0.5\ncoupling.gamma = abc\n", "coupling.gamma", 3),
    ("scenario = single\nbath.xi = 0.5\ncoupling.gamma = 1\nsweep.param = J\n", "sweep.values", None),
    ("scenario = single\nbath.xi = 0.5\ncoupling.gamma = 1\nfock.dim = 1\n", "fock.dim", 4),
])
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key
    assert err.value.line == line
    assert f"key '{key}'" in str(err.value)


def test_syntax_errors():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("[bath]\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("scenario = single\njust words\n")
    with pytest.raises(ConfigError, match="scenario"):
        parse_config("bath.xi = 0.5\n")
    with pytest.raises(ConfigError, match="unknown preset"):
        parse_config("", preset="nope")


def test_every_preset_builds():
    for name in PRESETS:
        cfg = parse_config("", preset=name)
        if cfg.sweep_param is None:
            setup = build_setup(cfg)
            assert setup.rho0.dim == setup.generator.dim
        else:
            assert all(build_setup(cfg.with_sweep_value(v)) for v in cfg.sweep_values)


def test_preset_groups_are_replaced_by_user_keys():
    cfg = parse_config("bath.beta = 2\ncoupling.g = 10\ncoupling.tau = 0.01\n"
                       "mode = both\n", preset="fig1b")
    assert cfg.xi is None and cfg.beta == 2
    assert cfg.gamma is None and cfg.rate == pytest.approx(1.0)
    assert cfg.t_max == 10.0
    cfg2 = parse_config("", preset="fig1b", overrides={"mode": "continuous", "run.workers": 3})
    assert cfg2.workers == 3
    assert parse_config("preset = fig2e\n").fock_dim == 40


def test_sweep_points():
    cfg = parse_config("", preset="fig_supp1")
    first = cfg.with_sweep_value(1)
    assert first.scenario == "single" and first.initial_state == "up"
    assert cfg.with_sweep_value(3).n_qubits == 3
    j = parse_config("", preset="fig_supp2").with_sweep_value(0.4)
    assert j.J == 0.4 and j.sweep_param is None
    with pytest.raises(ConfigError):
        parse_config("sweep.values = 0.5, 2.5\n", preset="fig_supp1")


def test_inverted_bath_only_through_xi():
    cfg = parse_config("", preset="fig1b_inset")
    assert cfg.bath().inverted and cfg.bath().beta < 0
    with pytest.raises(ConfigError):
        parse_config("bath.beta = -1\n", preset="fig1b")
