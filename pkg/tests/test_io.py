import json

import numpy as np
import pytest

from nonisopot import BallMeasure, PotentialParams, SphereMeasure, WeightField, build_grid
from nonisopot._validation import ValidationError
from nonisopot.capacity import CapacityProblem, capacity
from nonisopot.holomorphic import random_polynomial
from nonisopot.io import (
    capacity_result_from_dict,
    capacity_result_to_dict,
    csv_text,
    dumps_json,
    format_number,
    grid_from_dict,
    grid_to_dict,
    holo_from_dict,
    holo_to_dict,
    measure_from_dict,
    measure_to_dict,
    read_csv,
    read_json,
    weight_from_dict,
    weight_to_dict,
    write_csv,
    write_json,
)


def roundtrip(d):
    return json.loads(dumps_json(d))


def test_format_number():
    assert format_number(1 / 3) == "0.333333333333"
    assert format_number(123456789012345.0) == "1.23456789012e+14"
    assert format_number(True) == "true"
    assert format_number(np.int64(7)) == "7"
    assert format_number(float("nan")) == "nan"
    assert format_number(-float("inf")) == "-inf"
    assert format_number(None) == ""


@pytest.mark.parametrize("n,N", [(1, 16), (2, 6)])
def test_grid_round_trip(n, N):
    g = build_grid(n, N)
    w = WeightField.power(g, 0.3) if n == 2 else WeightField.constant(g, 2.0)
    data = roundtrip(grid_to_dict(g, w))
    g2 = grid_from_dict(data)
    np.testing.assert_array_equal(g2.nodes, g.nodes)
    np.testing.assert_array_equal(g2.weights, g.weights)
    w2 = weight_from_dict(data["weight"])
    np.testing.assert_array_equal(w2.values, w.values)
    assert w2.descriptor == w.descriptor


def test_weight_round_trip_custom():
    w = WeightField(np.array([1.0, 2.5, 0.1]))
    assert weight_from_dict(roundtrip(weight_to_dict(w))).kind == "custom"


def test_holo_round_trip():
    f = random_polynomial(2, 3, np.random.default_rng(0))
    g = holo_from_dict(roundtrip(holo_to_dict(f)))
    z = np.array([[0.2 + 0.1j, -0.3j]])
    assert g(z)[0] == f(z)[0]


def test_measure_round_trips():
    mu = SphereMeasure([3, 1], [0.5, 2.0])
    mu2 = measure_from_dict(roundtrip(measure_to_dict(mu)))
    np.testing.assert_array_equal(mu2.nodes, mu.nodes)
    np.testing.assert_array_equal(mu2.masses, mu.masses)
    nu = BallMeasure(np.array([[0.1 + 0.2j, 0.3j]]), [1.5])
    nu2 = measure_from_dict(roundtrip(measure_to_dict(nu)))
    np.testing.assert_array_equal(nu2.points, nu.points)
    assert len(measure_from_dict({"atoms": []})) == 0
    assert measure_from_dict({"dim": 2, "atoms": []}).points.shape == (0, 2)
    with pytest.raises(ValidationError):
        measure_from_dict({"atoms": [{"node": 1, "mass": 1.0}, {"coords": [[0, 0]], "mass": 1.0}]})


def test_capacity_result_round_trip():
    g = build_grid(1, 32)
    res = capacity(CapacityProblem(np.arange(4), PotentialParams(2.0, 0.3, 1), WeightField.constant(g), g))
    back = capacity_result_from_dict(roundtrip(capacity_result_to_dict(res)))
    assert back.value == res.value and back.converged == res.converged
    np.testing.assert_array_equal(back.optimizer, res.optimizer)
    np.testing.assert_array_equal(back.dual, res.dual)


def test_json_wrapping_and_nonfinite(tmp_path):
    path = tmp_path / "out.json"
    write_json(path, {"x": float("inf"), "y": np.float64(1.5), "z": np.arange(2)}, config={"command": "t"})
    data = read_json(path)
    assert data["config"] == {"command": "t"}
    assert data["result"] == {"x": "inf", "y": 1.5, "z": [0, 1]}
    assert "version" in data
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        read_json(bad)


def test_csv_rfc4180():
    text = csv_text([{"a": 1.0, "b": 'say "hi", ok'}, {"a": 2, "c": True}])
    assert text == 'a,b,c\r\n1,"say ""hi"", ok",\r\n2,,true\r\n'


def test_csv_round_trip_with_metadata(tmp_path):
    path = tmp_path / "t.csv"
    rows = [{"r": 0.1, "v": 1 / 7}, {"r": 0.2, "v": 2 / 7}]
    write_csv(path, rows, config={"command": "x", "params": {"p": 2.0}})
    raw = path.read_bytes()
    assert raw.startswith(b"# nonisopot {")
    assert raw.count(b"\r\n") == 4
    back, meta = read_csv(path)
    assert meta["config"]["params"]["p"] == 2.0
    assert [float(row["v"]) for row in back] == pytest.approx([1 / 7, 2 / 7], rel=1e-11)
    plain = tmp_path / "p.csv"
    write_csv(plain, rows)
    assert read_csv(plain)[1] is None
