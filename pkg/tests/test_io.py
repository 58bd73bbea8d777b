from __future__ import annotations

import json
import math

import numpy as np
import pytest

from footprint_ibvs.io import (dumps_json, read_csv, read_json, read_pgm_mask, read_ppm,
                               write_csv, write_json, write_pgm, write_ppm)


def test_ppm_round_trip_and_header(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    p = tmp_path / "a.ppm"
    write_ppm(p, img)
    raw = p.read_bytes()
    assert raw.startswith(b"P6\n4 3\n255\n")
    assert len(raw) == len(b"P6\n4 3\n255\n") + 36
    assert raw[-3:] == bytes([11, 11, 11])
    np.testing.assert_array_equal(read_ppm(p), img)


def test_pgm_mask_round_trip(tmp_path):
    m = np.array([[True, False], [False, True]])
    p = tmp_path / "m.pgm"
    write_pgm(p, m)
    assert p.read_bytes().endswith(bytes([255, 0, 0, 255]))
    np.testing.assert_array_equal(read_pgm_mask(p), m)


def test_json_fixed_order_and_precision(tmp_path):
    obj = {"b": 0.1, "a": [1, 2.0, True, None], "c": {"z": 1e-20}}
    s = dumps_json(obj)
    assert s.index('"b"') < s.index('"a"') < s.index('"c"')
    assert "0.10000000000000001" in s and "2.0" in s
    back = json.loads(s)
    assert back["b"] == 0.1 and back["c"]["z"] == 1e-20
    write_json(tmp_path / "x.json", obj)
    assert read_json(tmp_path / "x.json") == json.loads(s)


def test_json_rejects_non_finite():
    with pytest.raises(ValueError):
        dumps_json({"x": math.inf})


def test_csv_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["k", "v"], [["a", 0.1], ["b", 3]])
    assert p.read_text() == "k,v\na,0.10000000000000001\nb,3\n"
    rows = read_csv(p)
    assert rows == [{"k": "a", "v": "0.10000000000000001"}, {"k": "b", "v": "3"}]
    assert float(rows[0]["v"]) == 0.1
