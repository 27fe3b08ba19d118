import filecmp
import json

import numpy as np
import pytest

from hjvisc import DomainGeometry, GridFunction
from hjvisc.analysis import fit_rate
from hjvisc.cli import main
from hjvisc.reporting import ReportError, emit_csv, emit_node_csv, emit_rate_csv, emit_rate_svg

CONFIG = """
[problem]
p = 1.5
grid_n = 513
eps = [0.05, 0.025, 0.0125]

[data]
kind = "bump"
smoothness = "c2_zero_boundary"
height = 1.0

[experiment]
dt = 0.02
n_v = 81
n_samples = 1000
kappas = [0.16, 0.08, 0.04]
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG)
    return path


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_solve_writes_csvs_figures_and_manifest(config, tmp_path, capsys):
    out = tmp_path / "solve"
    assert main(["solve", "--config", str(config), "--out", str(out)]) == 0
    man = _manifest(out)
    listed = {f["path"] for f in man["files"]}
    written = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()}
    assert written == listed
    assert any(p.endswith(".csv") for p in listed) and any(p.endswith(".svg") for p in listed)
    assert man["passed"] and man["error"] is None
    assert man["config"]["problem"]["p"] == 1.5
    assert "numpy" in man["versions"]
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["rates", "barriers", "gradient", "semiconcavity", "oracle", "cutoff"])
def test_every_pipeline_runs(config, tmp_path, name):
    out = tmp_path / name
    assert main([name, "--config", str(config), "--out", str(out)]) == 0
    assert _manifest(out)["stages"][0]["name"] == name


def test_runs_are_byte_identical(config, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["rates", "--config", str(config), "--out", str(out)]) == 0
    names = sorted(p.name for p in outs[0].iterdir() if p.name != "manifest.json")
    assert names == sorted(p.name for p in outs[1].iterdir() if p.name != "manifest.json")
    for name in names:
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name


def test_failed_acceptance_check_exits_one(tmp_path):
    path = tmp_path / "tight.toml"
    path.write_text(CONFIG + "\n[tolerances]\nrate_margin = -5.0\n")
    assert main(["rates", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert not _manifest(tmp_path / "o")["passed"]


def test_config_error_exits_two(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(CONFIG.replace("p = 1.5", "p = 2.5"))
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "(1, 2]" in capsys.readouterr().err


def test_stage_error_is_recorded(tmp_path, monkeypatch):
    import hjvisc.cli as cli

    def broken(cfg, out):
        raise RuntimeError("did not converge")

    monkeypatch.setattr(cli, "run_experiment", broken)
    path = tmp_path / "run.toml"
    path.write_text(CONFIG)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "did not converge" in _manifest(tmp_path / "o")["error"]


def test_list_checks(capsys):
    assert main(["--list-checks"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 12


def test_no_subcommand_prints_help(capsys):
    assert main([]) == 2


def test_empty_report_is_refused(tmp_path):
    with pytest.raises(ReportError):
        emit_csv(("a", "b"), [], tmp_path / "t.csv")
    assert not (tmp_path / "t.csv").exists()
    with pytest.raises(ReportError):
        emit_csv(("a", "b"), [(1,)], tmp_path / "t.csv")


def test_csv_formats(tmp_path):
    u = GridFunction(DomainGeometry(), np.array([np.inf, 0.1, 0.2, 0.1, np.inf]))
    text = emit_node_csv(u, tmp_path / "u.csv").read_text().splitlines()
    assert text[0] == "index,x,d_x,value"
    assert text[1] == "0,0.0,0.0,inf"
    assert text[2] == "1,0.25,0.25,0.1"
    rep = fit_rate([(0.1, 0.1), (0.05, 0.05), (0.025, 0.025)], 1.0)
    lines = emit_rate_csv(rep, tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "eps,error"
    assert lines[-1].startswith("#fit,") and lines[-1].endswith(",1")


def test_same_figure_twice_is_byte_identical(tmp_path):
    rep = fit_rate([(0.1, 0.3), (0.05, 0.2), (0.025, 0.15)], 0.5)
    a = emit_rate_svg(rep, tmp_path / "a.svg", title="t")
    b = emit_rate_svg(rep, tmp_path / "b.svg", title="t")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().lstrip().startswith("<?xml")
