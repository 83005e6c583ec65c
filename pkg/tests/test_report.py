import json

import numpy as np
import pytest

from hierlap.report import (build_document, canonical_json, csv_text,
                            fmt_float, sha256_hex, validate_document,
                            write_csv)


def test_fmt_float_roundtrip():
    for x in (1 / 3, 1e-300, 2**0.5, -0.0, 12345.6789, 1e22):
        assert float(fmt_float(x)) == x
    with pytest.raises(ValueError):
        fmt_float(float("inf"))
    with pytest.raises(ValueError):
        fmt_float(float("nan"))


def test_canonical_json_determinism_and_types():
    obj = {"b": [1, 2.5, None, True], "a": {"x": np.float64(0.1), "y": np.int32(3)},
           "z": complex(1.0, -2.0), "arr": np.array([0.5, 0.25])}
    s1 = canonical_json(obj)
    s2 = canonical_json({"z": complex(1.0, -2.0), "a": {"y": np.int32(3), "x": 0.1},
                         "b": [1, 2.5, None, True], "arr": (0.5, 0.25)})
    assert s1 == s2
    parsed = json.loads(s1)
    assert parsed["a"]["x"] == 0.1
    assert parsed["z"] == {"im": -2.0, "re": 1.0}


def test_document_validates():
    doc_str = build_document("sparse-ess/v1", "sparse-ess", {"p": 2},
                             {"inherited": [1.0], "intervals": [], "negative": None,
                              "config": {}}, seed=None, wall_time_s=0.1)
    doc = json.loads(doc_str)
    validate_document(doc)
    doc["result"]["inherited"] = [2.0]
    with pytest.raises(ValueError):
        validate_document(doc)


def test_document_rejects_unknown_schema():
    with pytest.raises(ValueError):
        build_document("nope/v9", "x", {}, {})


def test_csv_rfc4180_shape():
    text = csv_text(("a", "b"), [(1, 0.5), (2, 1.0 / 3.0)])
    lines = text.split("\r\n")
    assert lines[0] == "a,b"
    assert lines[1] == "1,0.5"
    assert lines[2] == "2,0.33333333333333331"


def test_write_csv_sidecar_manifest(tmp_path):
    path = tmp_path / "table.csv"
    text = write_csv(path, ("x",), [(0.25,)], "heat-kernel", {"p": 2})
    sidecar = json.loads((tmp_path / "table.csv.manifest.json").read_text())
    validate_document(sidecar)
    assert sidecar["result"]["csv_sha256"] == sha256_hex(text)
    assert sidecar["result"]["n_rows"] == 1
