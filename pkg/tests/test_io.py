import json

import numpy as np
import pytest

from fracperim.geometry import build_grid_space
from fracperim.io import (SpaceFileError, dumps, load_set, load_space, save_set, save_space, space_from_dict,
                          space_to_dict, write_csv)
from fracperim.space import DiscreteSpace, IndicatorSet


def test_grid_roundtrip(tmp_path):
    sp = build_grid_space(2, 5)
    save_space(sp, tmp_path / "g.json")
    back = load_space(tmp_path / "g.json")
    assert np.array_equal(back.points, sp.points)
    assert np.array_equal(back.weights, sp.weights)
    assert back.resolution_h == sp.resolution_h
    assert back.grid == sp.grid


def test_table_roundtrip(tmp_path):
    D = np.array([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]], dtype=float)
    sp = DiscreteSpace(None, [1.0, 2.0, 3.0], 0.5, distances=D)
    d = space_to_dict(sp)
    assert d["metric"] == "table" and d["distances"] == [1.0, 2.0, 1.5]
    back = space_from_dict(json.loads(json.dumps(d)))
    assert np.array_equal(back.distance_matrix(), D)


def test_set_roundtrip(tmp_path):
    sp = build_grid_space(1, 6)
    E = IndicatorSet.from_indices(sp, [0, 3, 5])
    save_set(E, tmp_path / "e.json")
    assert (tmp_path / "e.json").read_text() == "[1,0,0,1,0,1]\n"
    assert load_set(tmp_path / "e.json", sp) == E


@pytest.mark.parametrize("text, needle", [
    ('{"weights": [1], ', "line 1"),
    ('[1, 2]', "top level"),
    ('{"weights": [1, 1]}', "resolution_h"),
    ('{"weights": [1, 1], "resolution_h": 0.1}', "points"),
    ('{"weights": [1, 1], "resolution_h": 0.1, "metric": "table", "distances": []}', "distances"),
    ('{"weights": [1, 1], "resolution_h": 0.1, "metric": "taxicab", "points": [[0], [1]]}', "metric"),
])
def test_malformed_space(tmp_path, text, needle):
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(SpaceFileError, match=needle):
        load_space(p)


def test_malformed_set(tmp_path):
    sp = build_grid_space(1, 3)
    p = tmp_path / "s.json"
    for text, needle in (('{"a": 1}', "array"), ("[1, 0]", "2 entries"), ("[1, 0, 2]", "entry 2")):
        p.write_text(text)
        with pytest.raises(SpaceFileError, match=needle):
            load_set(p, sp)


def test_dumps_numpy_and_order():
    s = dumps({"b": np.float64(0.5), "a": np.arange(2), "c": np.bool_(True), "d": np.int32(4)})
    assert json.loads(s) == {"a": [0, 1], "b": 0.5, "c": True, "d": 4}
    assert s.index('"a"') < s.index('"b"')


def test_csv_exact_floats(tmp_path):
    write_csv(tmp_path / "t.csv", ["x", "y"], [(0.1, 1), (1 / 3, 2)])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["x,y", "0.1,1", f"{1 / 3!r},2"]
