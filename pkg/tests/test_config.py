import pytest

from hjvisc.config import EXPERIMENTS, ConfigError, load_config, parse_config

MINIMAL = """
[problem]
p = 1.5
eps = [0.1]
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL, "solve")
    assert cfg.problem["grid_n"] == 1025
    assert cfg.problem["a"] == 0.0 and cfg.problem["b"] == 1.0
    assert cfg.data["kind"] == "zero"
    assert cfg.params["boundary_mode"] == "asymptotic_offset"
    pr = cfg.problem_spec()
    assert pr.exponents.p == 1.5 and pr.epsilons == (0.1,)


def test_p_outside_the_range_is_rejected_with_the_range():
    with pytest.raises(ConfigError, match=r"\(1, 2\]"):
        parse_config(MINIMAL.replace("p = 1.5", "p = 2.5"), "solve")


@pytest.mark.parametrize("experiment", ["rates", "gradient"])
def test_sweeps_need_three_eps(experiment):
    with pytest.raises(ConfigError, match="at least 3 eps"):
        parse_config(MINIMAL, experiment)


@pytest.mark.parametrize(
    "text, match",
    [
        (MINIMAL + "\n[extra]\nx = 1\n", "unknown section"),
        (MINIMAL.replace("eps", "epsilon"), "unknown key"),
        ("[problem]\neps = [0.1]\n", "missing required key"),
        (MINIMAL.replace("[0.1]", "[0.05, 0.1]"), "strictly decreasing"),
        (MINIMAL.replace("[0.1]", "[1.5]"), r"\(0, 1\)"),
        (MINIMAL + '\n[data]\nkind = "wave"\n', "kind"),
        (MINIMAL + '\n[data]\nsmoothness = "rough"\n', "smoothness"),
        (MINIMAL + "\n[data]\nkind = \"samples\"\n", "samples need"),
        (MINIMAL + '\n[experiment]\nboundary_mode = "robin"\n', "boundary_mode"),
        (MINIMAL + "\n[experiment]\netas = [1.2]\n", "fractions of the cap"),
        (MINIMAL + "\n[experiment]\nband = [3, 2]\n", "band"),
        (MINIMAL.replace("p = 1.5", "p = true"), "boolean"),
        (MINIMAL.replace("p = 1.5", 'p = "x"'), "type"),
        ("[problem\n", "parse error"),
    ],
)
def test_invalid_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, "solve")


def test_experiment_name_must_match_the_command():
    text = MINIMAL + '\n[experiment]\nname = "oracle"\n'
    assert parse_config(text).experiment == "oracle"
    with pytest.raises(ConfigError, match="asks for"):
        parse_config(text, "solve")
    with pytest.raises(ConfigError, match="experiment must be one of"):
        parse_config(MINIMAL)


def test_data_kinds_build():
    text = MINIMAL + '\n[data]\nkind = "samples"\nxs = [0, 0.5, 1]\nvalues = [0, 1, 0]\n'
    f = parse_config(text, "solve").data_function()
    assert f(0.25) == pytest.approx(0.5)
    for smooth, prefix in (("lipschitz_hat", "hat"), ("c2_compact", "c2_compact"), ("c2_zero_boundary", "c2_zero")):
        text = MINIMAL + f'\n[data]\nkind = "bump"\nsmoothness = "{smooth}"\n'
        assert parse_config(text, "solve").data_function().name.startswith(prefix)


def test_echo_round_trips_the_sections():
    echo = parse_config(MINIMAL, "solve").echo()
    assert set(echo) == {"experiment", "problem", "data", "experiment_params", "output", "tolerances"}


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="no such config"):
        load_config(tmp_path / "absent.toml")


def test_every_experiment_is_accepted():
    text = MINIMAL.replace("[0.1]", "[0.1, 0.05, 0.025]")
    for name in EXPERIMENTS:
        assert parse_config(text, name).experiment == name
