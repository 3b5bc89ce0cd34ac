import json
import textwrap

import pytest

from bogobounds.classical import classical_bounds
from bogobounds.cli import main
from bogobounds.experiment import (
    REPORT_FIELDS,
    WORKERS_ENV,
    ConfigError,
    RowFailure,
    load_config,
    parse_config,
    run_experiment,
)
from bogobounds.models import ModelSpec, build_model

ISING_CFG = """
schema_version = 1
seed = 3

[model]
kind = "ising_chain"
N = 6
d = 2
[model.couplings]
J = 1.0
h = 0.5

[sweep]
beta = [2.0, 0.5]
scale = [0.0, 1.0, 0.5]
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_minimal_config_defaults():
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 4, "d": 2}, "sweep": {"beta": [1.0]}})
    assert cfg.backend == "dense" and cfg.variational is False
    assert cfg.scale_grid == (1.0,) and cfg.probes == 32 and cfg.degree is None
    assert cfg.output_format == "both" and cfg.max_workers == 1 and cfg.seed == 0


def test_beta_zero_names_beta_grid():
    with pytest.raises(ConfigError, match="beta_grid"):
        parse_config({"model": {"kind": "ising_chain"}, "sweep": {"beta": [1.0, 0.0]}})


def test_unknown_kind_lists_allowed():
    with pytest.raises(ConfigError) as err:
        parse_config({"model": {"kind": "potts"}, "sweep": {"beta": [1.0]}})
    for kind in ("ising_chain", "xxz_chain", "oscillator_chain", "diagonal_random"):
        assert kind in str(err.value)


def test_config_error_lists_every_problem():
    raw = {"model": {"kind": "ising_chain"}, "sweep": {"beta": []},
           "backend": {"kind": "gpu", "probes": 1}, "variational": {"enabled": True, "budget": 0},
           "colour": "red"}
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    text = str(err.value)
    for needle in ("beta_grid", "backend.kind", "backend.probes", "variational.budget", "colour"):
        assert needle in text
    assert len(err.value.problems) == 5


def test_parse_error_reports_location(tmp_path):
    path = write(tmp_path, "[model]\nkind = \n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")


def test_decoupled_row_is_zero(tmp_path):
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 8, "d": 2},
                        "sweep": {"beta": [1.0], "scale": [0.0]}})
    (row,) = run_experiment(cfg, tmp_path)
    assert row["lower"] == row["upper"] == row["delta_F"] == 0.0


def test_diagonal_rows_match_classical(tmp_path):
    cfg = parse_config({"model": {"kind": "diagonal_random", "couplings": {"seed": 4, "dim": 16}},
                        "sweep": {"beta": [1.0]}})
    (row,) = run_experiment(cfg, tmp_path)
    P = build_model(ModelSpec("diagonal_random", couplings={"seed": 4, "dim": 16}))
    ref = classical_bounds(P.H0.entries.diagonal().real.tolist(), P.U.entries.diagonal().real.tolist(), 1.0)
    assert abs(row["lower"] - ref.lower) < 1e-12
    assert abs(row["delta_F"] - ref.delta_F) < 1e-12
    assert abs(row["upper"] - ref.upper) < 1e-12


def test_two_beta_grid_ascending(tmp_path):
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 4, "d": 2}, "sweep": {"beta": [3.0, 0.25]}})
    rows = run_experiment(cfg, tmp_path)
    assert [r["beta"] for r in rows] == [0.25, 3.0]


def test_report_files(tmp_path):
    cfg = load_config(write(tmp_path, ISING_CFG))
    rows = run_experiment(cfg, tmp_path / "out")
    assert len(rows) == 6
    assert [(r["beta"], r["scale"]) for r in rows] == cfg.grid()
    lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert lines[0] == ",".join(REPORT_FIELDS)
    assert len(lines) == 7
    payload = json.loads((tmp_path / "out" / "report.json").read_text())
    assert [list(p) for p in payload] == [list(REPORT_FIELDS)] * 6
    for p, line in zip(payload, lines[1:]):
        cells = dict(zip(REPORT_FIELDS, line.split(",")))
        assert float(cells["upper"]) == p["upper"]
        assert p["lower"] <= p["delta_F"] + 1e-9 and p["delta_F"] <= p["upper"] + 1e-9
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config_sha256"] == cfg.digest()
    assert manifest["seed"] == 3 and manifest["complete"] and manifest["version"]
    assert len(manifest["wall_time_ms"]) == 6
    assert not (tmp_path / "out" / "PARTIAL").exists()


def test_csv_byte_identical_across_runs_and_workers(tmp_path):
    cfg = load_config(write(tmp_path, ISING_CFG))
    outputs = []
    for i, workers in enumerate((1, 1, 8)):
        run_experiment(cfg, tmp_path / f"run{i}", workers=workers)
        outputs.append((tmp_path / f"run{i}" / "report.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_variational_columns(tmp_path):
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 4, "d": 2}, "sweep": {"beta": [1.0]},
                        "variational": {"enabled": True, "family": "per_boundary", "budget": 40}})
    (row,) = run_experiment(cfg, tmp_path)
    assert row["lower"] - 1e-9 <= row["var_lower"] <= row["delta_F"] + 1e-9
    assert row["delta_F"] - 1e-9 <= row["var_upper"] <= row["upper"] + 1e-9


def test_stochastic_backend_rows(tmp_path):
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 6, "d": 2}, "sweep": {"beta": [1.0]},
                        "backend": {"kind": "stochastic", "probes": 16}})
    (row,) = run_experiment(cfg, tmp_path)
    assert "delta_F" not in row and row["upper_stderr"] > 0
    line = (tmp_path / "report.csv").read_text().splitlines()[1]
    assert dict(zip(REPORT_FIELDS, line.split(",")))["delta_F"] == ""


def test_row_failure_leaves_partial_marker(tmp_path, monkeypatch):
    from bogobounds import experiment

    original = experiment._dense_row

    def flaky(cfg, P, beta, scale):
        if beta > 1:
            raise ArithmeticError("boom")
        return original(cfg, P, beta, scale)

    monkeypatch.setattr(experiment, "_dense_row", flaky)
    cfg = parse_config({"model": {"kind": "ising_chain", "N": 4, "d": 2}, "sweep": {"beta": [0.5, 2.0]}})
    with pytest.raises(RowFailure, match="boom"):
        run_experiment(cfg, tmp_path)
    assert "boom" in (tmp_path / "PARTIAL").read_text()
    assert not json.loads((tmp_path / "manifest.json").read_text())["complete"]
    assert len((tmp_path / "report.csv").read_text().splitlines()) == 2


def test_cli_commands(tmp_path, capsys, monkeypatch):
    cfg = write(tmp_path, ISING_CFG)
    assert main(["validate", str(cfg)]) == 0
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setenv(WORKERS_ENV, "4")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "b"), "--seed", "3"]) == 0
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["workers"] == 4
    bad = write(tmp_path, "[model]\nkind = 'potts'\n[sweep]\nbeta = [1.0]\n", "bad.toml")
    assert main(["validate", str(bad)]) == 2
    assert "allowed: ising_chain" in capsys.readouterr().err


def test_cli_oracle(tmp_path):
    cfg = write(tmp_path, """
        [model]
        kind = "diagonal_random"
        [model.couplings]
        seed = 2
        dim = 16
        [sweep]
        beta = [0.5, 1.0, 4.0]
        scale = [1.0, 2.0]
        """)
    assert main(["oracle", str(cfg), "--output-dir", str(tmp_path)]) == 0
    assert len((tmp_path / "oracle.csv").read_text().splitlines()) == 7
    non_diag = write(tmp_path, "[model]\nkind = 'ising_chain'\nN = 4\nd = 2\n[sweep]\nbeta = [1.0]\n", "i.toml")
    assert main(["oracle", str(non_diag), "--output-dir", str(tmp_path)]) == 2


def test_cli_dense_guard(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\nkind = 'ising_chain'\nN = 14\nd = 2\n[sweep]\nbeta = [1.0]\n")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path)]) == 1
    assert "stochastic" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["ising_chain.toml", "ising_chain_stochastic.toml"])
def test_shipped_configs_validate(name):
    from pathlib import Path

    cfg = load_config(Path(__file__).parent.parent / "configs" / name)
    assert cfg.grid()
