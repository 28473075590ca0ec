import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rfsolve.errors import TensorFormatError
from rfsolve.tensorio import read_csv, read_tensor, write_csv, write_tensor


def test_two_element_file_size(tmp_path):
    # 8 magic + 4 version + 4 rank + 8 dim + 16 payload
    path = tmp_path / "t.rft"
    write_tensor(np.array([0.0, 1.0]), path)
    raw = path.read_bytes()
    assert len(raw) == 8 + 4 + 4 + 8 + 16 == 40
    assert raw[:8] == b"RFTENSOR"
    assert struct.unpack("<IIQ", raw[8:24]) == (1, 1, 2)
    assert struct.unpack("<2d", raw[24:]) == (0.0, 1.0)


def test_round_trip_bytes(tmp_path):
    a = np.random.default_rng(3).standard_normal((3, 4))
    write_tensor(a, tmp_path / "a.rft")
    b = read_tensor(tmp_path / "a.rft")
    assert b.shape == (3, 4) and b.tobytes() == a.tobytes()
    write_tensor(b, tmp_path / "b.rft")
    assert (tmp_path / "a.rft").read_bytes() == (tmp_path / "b.rft").read_bytes()


def test_nan_written_but_rejected_on_read(tmp_path):
    write_tensor(np.array([1.0, np.nan]), tmp_path / "n.rft")
    with pytest.raises(TensorFormatError, match="invalid data"):
        read_tensor(tmp_path / "n.rft")


def test_bad_magic(tmp_path):
    path = tmp_path / "m.rft"
    write_tensor(np.ones(2), path)
    path.write_bytes(b"RFTENSOX" + path.read_bytes()[8:])
    with pytest.raises(TensorFormatError, match="not a tensor file"):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "c.rft"
    write_tensor(np.ones((2, 3)), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TensorFormatError, match="corrupt file"):
        read_tensor(path)


def test_write_to_missing_directory_names_path(tmp_path):
    with pytest.raises(OSError, match="nope"):
        write_tensor(np.ones(1), tmp_path / "nope" / "x.rft")


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=4, min_side=1, max_side=5),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_round_trip_property(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("rt") / "x.rft"
    write_tensor(arr, path)
    back = read_tensor(path)
    assert back.shape == arr.shape
    assert back.tobytes() == np.ascontiguousarray(arr).tobytes()


def test_csv_single_row(tmp_path):
    write_csv([("mse", [0.5])], tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text() == "mse,0.5\n"


def test_csv_empty(tmp_path):
    write_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == b""


def test_csv_two_rows(tmp_path):
    write_csv([("a", [1.0, 2.0, 3.0]), ("b", [0.1, 1e-300, -7.25])], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 2
    assert all(len(line.split(",")) == 4 for line in lines)


def test_csv_ragged_rejected(tmp_path):
    with pytest.raises(ValueError, match="ragged"):
        write_csv([("a", [1.0]), ("b", [1.0, 2.0])], tmp_path / "r.csv")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
@settings(deadline=None)
def test_csv_floats_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    write_csv([("x", values)], path, metadata={"k": "v"})
    meta, rows = read_csv(path)
    assert meta == {"k": "v"}
    assert rows[0][1] == values
