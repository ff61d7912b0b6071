from __future__ import annotations

import csv
import json

import pytest

from exactpert.cli import main, run_command

COARSE = ["--grid-h", "1e-2", "--xi-max", "10"]

COMMANDS = {
    "implicit": ["formal", "standard-form", "borel", "resum", "check", "majorant"],
    "standard_form": ["borel", "majorant"],
    "series": ["borel", "resum"],
    "matrix": ["matrix", "eigen"],
}


def _run(*argv) -> tuple[int, dict | None]:
    return run_command([str(a) for a in argv] + ["--quiet"])


def test_formal_catalan_integers(data_dir):
    code, doc = _run("formal", data_dir / "catalan.json", "--order", 8)
    assert code == 0
    values = [re for re, _ in doc["result"]["coefficients"]]
    assert values == [1.0, 1.0, 2.0, 5.0, 14.0, 42.0, 132.0, 429.0, 1430.0]


def test_config_echoes_numerics(data_dir):
    _, doc = _run("resum", data_dir / "catalan.json", "--hbar", "0.1", *COARSE, "--tol", "1e-9")
    cfg = doc["config"]
    assert cfg["h"] == 0.01 and cfg["xi_max"] == 10.0 and cfg["tol"] == 1e-9 and cfg["order"] == 8
    assert cfg["hbar"] == [[0.1, 0.0]] and cfg["theta"] == 0.0 and cfg["R"] == 1.0


def test_every_example_runs_deterministically(example_paths):
    for path in example_paths:
        kind = json.loads(path.read_text())["kind"]
        for command in COMMANDS[kind]:
            flags = COARSE + (["--check-tol", "1e-4"] if command == "check" else [])
            first = _run(command, path, *flags)
            second = _run(command, path, *flags)
            assert first[0] == 0, (path.name, command)
            assert json.dumps(first[1], sort_keys=True) == json.dumps(second[1], sort_keys=True)


def test_output_file_is_byte_identical(tmp_path, data_dir):
    outs = []
    for name in ("a.json", "b.json"):
        target = tmp_path / name
        assert main(["check", str(data_dir / "euler.json"), "--out", str(target), "--quiet", "--hbar", "0.1"]) == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]


def test_csv_tables(tmp_path, data_dir):
    series_csv = tmp_path / "series.csv"
    _run("formal", data_dir / "catalan.json", "--csv", series_csv)
    rows = list(csv.reader(series_csv.open()))
    assert rows[0] == ["n", "re", "im"] and rows[3][1] == "2.0"
    ray_csv = tmp_path / "ray.csv"
    _run("borel", data_dir / "exponential_standard_form.json", "--csv", ray_csv, *COARSE)
    rows = list(csv.reader(ray_csv.open()))
    assert rows[0] == ["xi", "re", "im"] and len(rows) == 1002
    sweep_csv = tmp_path / "sweep.csv"
    _run("sweep", data_dir / "catalan_family.json", "--csv", sweep_csv, *COARSE)
    rows = list(csv.reader(sweep_csv.open()))
    assert rows[0][:3] == ["x", "hbar_re", "hbar_im"] and rows[0][-1] == "deviation"
    assert len(rows) == 1 + 3 * 2


def test_sweep_over_parameter_grid(data_dir):
    code, doc = _run("sweep", data_dir / "catalan_family.json")
    assert code == 0
    assert [p["x"] for p in doc["result"]["points"]] == [0.5, 1.0, 1.5]
    assert doc["result"]["max_deviation"] < 1e-6


def test_eigen_two_by_two(data_dir):
    code, doc = _run("eigen", data_dir / "matrix_2x2.json", "--hbar", "0.1")
    assert code == 0
    values = [re for re, _ in doc["result"]["records"][0]["value"]]
    assert values == pytest.approx([-0.009901951, 1.009901951], abs=1e-7)


def test_majorant_report(data_dir):
    code, doc = _run("majorant", data_dir / "exponential_standard_form.json", "--order", 12)
    assert code == 0 and doc["result"]["passed"]


def test_complex_hbar_flag(data_dir):
    code, doc = _run("resum", data_dir / "catalan.json", "--hbar", "0.1+0.02j", *COARSE)
    assert code == 0 and doc["result"]["results"][0]["hbar"] == [0.1, 0.02]


# Constructed failures and their exit codes.

def test_exit_domain_hbar_outside_sector(data_dir):
    assert _run("resum", data_dir / "catalan.json", "--hbar", "2.0")[0] == 2


def test_exit_domain_parse_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert _run("formal", bad)[0] == 2


def test_exit_domain_wrong_kind(data_dir):
    assert _run("matrix", data_dir / "catalan.json")[0] == 2


def test_exit_domain_singular_jacobian(tmp_path, capsys):
    doc = {"kind": "implicit", "dim": 1, "seed": [[0.0, 0.0]],
           "coeffs": [{"k": 0, "m": [2], "i": 1, "v": [1.0, 0.0]}, {"k": 1, "m": [0], "i": 1, "v": [-1.0, 0.0]}]}
    path = tmp_path / "singular.json"
    path.write_text(json.dumps(doc))
    assert _run("formal", path)[0] == 2
    assert "IFT hypothesis fails" in capsys.readouterr().err


def test_exit_domain_defective_matrix(tmp_path):
    doc = {"kind": "matrix", "size": 2,
           "orders": [[[[1.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]]}
    path = tmp_path / "defective.json"
    path.write_text(json.dumps(doc))
    assert _run("matrix", path)[0] == 2


def test_exit_convergence_non_contraction(tmp_path):
    doc = {"kind": "standard_form", "dim": 1,
           "coeffs": [{"k": 0, "m": [0], "i": 1, "v": [1.0, 0.0]}, {"k": 0, "m": [1], "i": 1, "v": [400.0, 0.0]}]}
    path = tmp_path / "stiff.json"
    path.write_text(json.dumps(doc))
    assert _run("borel", path, "--grid-h", "1e-2", "--xi-max", "5")[0] == 3


def test_exit_convergence_pade_pole(data_dir, tmp_path):
    doc = {"kind": "series", "dim": 1, "coefficients": [[0.0, 0.0]] + [[1.0, 0.0]] * 10}
    path = tmp_path / "pole.json"
    path.write_text(json.dumps(doc))
    assert _run("resum", path, "--hbar", "0.1")[0] == 2


def test_exit_check_failure(data_dir):
    assert _run("check", data_dir / "euler.json", "--check-tol", "1e-15", *COARSE)[0] == 1


def test_bad_flag_is_usage_error(data_dir):
    with pytest.raises(SystemExit) as info:
        run_command(["resum", str(data_dir / "catalan.json"), "--xi-max", "-1"])
    assert info.value.code == 2
