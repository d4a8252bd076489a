import json
from pathlib import Path

import numpy as np
import pytest

from env_settings import TOOL_VERSION
from utils.artifacts import header_block, read_json, render_csv, render_json, to_jsonable, write_json
from utils.models.trajectory import SecondOrderFit


def test_header_carries_version_and_tolerances():
    header = header_block("abc", 7, "qrm coup --preset three-qubit")
    assert header["tool_version"] == TOOL_VERSION
    assert header["model_hash"] == "abc"
    assert header["seed"] == 7
    assert "residual_tol" in header["tolerances"]


def test_complex_values_become_pairs():
    assert to_jsonable(np.array([1 + 2j, 3j])) == [[1.0, 2.0], [0.0, 3.0]]
    assert to_jsonable({"n": np.int64(3), "x": np.float64(0.5), "ok": np.bool_(True)}) == {"n": 3, "x": 0.5, "ok": True}


def test_models_in_payloads_keep_their_serializers():
    fit = SecondOrderFit(j=0, k=1, c2=-1 + 0.5j, c3=0j, predicted=-1 + 0.5j, relative_error=0.0)
    data = to_jsonable({"fit": fit, "path": Path("results")})
    assert data["fit"]["c2"] == [-1.0, 0.5]
    assert data["path"] == "results"
    assert SecondOrderFit.model_validate(data["fit"]).c2 == -1 + 0.5j


def test_unknown_objects_are_rejected():
    with pytest.raises((TypeError, ValueError)):
        to_jsonable({"x": object()})


def test_render_json_is_stable():
    header = header_block(None, 1, "qrm verify")
    first = render_json(header, {"b": np.eye(2), "a": 1})
    second = render_json(header, {"a": 1, "b": np.eye(2)})
    assert first == second
    assert list(json.loads(first)) == ["a", "b", "header"]


def test_render_csv_header_lines():
    text = render_csv({"seed": 3, "command": "qrm markov"}, ["s", "p"], [[0.1, 0.25], [1.0, 0.5]])
    lines = text.splitlines()
    assert lines[0] == '# command: "qrm markov"'
    assert lines[1] == "# seed: 3"
    assert lines[2] == "s,p"
    assert lines[3] == "0.1,0.25"


def test_write_json_creates_directories(tmp_path):
    path = write_json(tmp_path / "nested" / "coup.json", header_block("h", None, "qrm coup"), {"rank": 1})
    data = read_json(path)
    assert data["rank"] == 1
    assert data["header"]["model_hash"] == "h"
