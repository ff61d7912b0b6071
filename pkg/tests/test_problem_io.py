from __future__ import annotations

import copy
import json

import numpy as np
import pytest

from exactpert import ProblemFile, dump_problem, parse_problem
from exactpert.errors import ContinuationError, DomainError, ParseError
from exactpert.problem_io import format_json, problem_from_dict, problem_to_dict

CATALAN_DOC = {
    "kind": "implicit",
    "dim": 1,
    "coeffs": [
        {"k": 0, "m": [1], "i": 1, "v": [1.0, 0.0]},
        {"k": 0, "m": [0], "i": 1, "v": [-1.0, 0.0]},
        {"k": 1, "m": [2], "i": 1, "v": [-1.0, 0.0]},
    ],
    "seed": [[1.0, 0.0]],
}


def test_every_example_round_trips(example_paths):
    assert len(example_paths) >= 9
    for path in example_paths:
        pf = parse_problem(path)
        text = dump_problem(pf)
        assert text == path.read_text(), path.name
        again = problem_from_dict(json.loads(text))
        assert problem_to_dict(again) == problem_to_dict(pf)


def test_dump_writes_file(tmp_path, data_dir):
    pf = parse_problem(data_dir / "catalan.json")
    out = tmp_path / "copy.json"
    dump_problem(pf, out)
    assert out.read_text() == (data_dir / "catalan.json").read_text()


def test_minimal_document_defaults():
    pf = problem_from_dict(CATALAN_DOC)
    assert isinstance(pf, ProblemFile)
    assert pf.kind == "implicit" and pf.numerics.order == 8 and pf.numerics.xi_max == 40.0
    assert pf.sector.theta == 0.0 and pf.sector.R == 1.0


def test_log_spaced_sweep():
    doc = dict(CATALAN_DOC, sweep={"hbar_values": {"start": 0.01, "stop": 0.1, "num": 3}})
    hbars = problem_from_dict(doc).sweep.hbar_values
    np.testing.assert_allclose(np.real(hbars), [0.01, 10**-1.5, 0.1])


@pytest.mark.parametrize("mutate,fragment", [
    (lambda d: d["coeffs"][2].pop("m"), "$.coeffs[2]: missing field 'm'"),
    (lambda d: d["coeffs"][1].update(v="x"), "$.coeffs[1].v"),
    (lambda d: d["coeffs"][0].update(i=2), "$.coeffs[0].i"),
    (lambda d: d["coeffs"][0].update(m=[1, 0]), "$.coeffs[0].m"),
    (lambda d: d.update(kind="quartic"), "$.kind"),
    (lambda d: d.update(numerics={"order": -1}), "$.numerics.order"),
    (lambda d: d.update(numerics={"orders": 3}), "unknown numerics field"),
    (lambda d: d.pop("seed"), "$.seed"),
    (lambda d: d["coeffs"].append(dict(d["coeffs"][0])), "duplicate coefficient"),
])
def test_schema_errors_name_the_field(mutate, fragment):
    doc = copy.deepcopy(CATALAN_DOC)
    mutate(doc)
    with pytest.raises(ParseError) as info:
        problem_from_dict(doc)
    assert fragment in str(info.value)


def test_hbar_outside_sector():
    doc = dict(CATALAN_DOC, sweep={"hbar_values": [0.1, 2.0]})
    with pytest.raises(DomainError, match=r"hbar_values\[1\]"):
        problem_from_dict(doc)


def test_pole_on_ray_rejected():
    doc = copy.deepcopy(CATALAN_DOC)
    doc["borel"] = [{"m": [0], "i": 1, "constant": [-1.0, 0.0],
                     "rational": [{"num": [[1.0, 0.0]], "den": [[1.0, 0.0], [-0.5, 0.0]]}]}]
    with pytest.raises(ContinuationError, match=r"\$\.borel\[0\]"):
        problem_from_dict(doc)


def test_malformed_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "kind": "implicit",\n  "dim": 1,,\n}')
    with pytest.raises(ParseError, match=r"bad\.json:3:"):
        parse_problem(bad)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        parse_problem(tmp_path / "nope.json")


def test_format_json_is_stable():
    doc = {"b": [1.0, 2.0], "a": {"z": [[1.0, 0.0]]}}
    text = format_json(doc)
    assert text.index('"a"') < text.index('"b"')
    assert '"b": [1.0, 2.0]' in text
    assert json.loads(text) == doc


def test_matrix_example_parses(data_dir):
    pf = parse_problem(data_dir / "matrix_3x3.json")
    assert pf.kind == "matrix" and pf.problem.n == 3 and pf.problem.degree == 1


def test_with_numerics_overrides():
    pf = problem_from_dict(CATALAN_DOC).with_numerics(order=4, xi_max=None)
    assert pf.numerics.order == 4 and pf.numerics.xi_max is None
