import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geocipher import io as gio
from geocipher.cipher import CipherParams, decrypt_solve, encrypt_pipeline
from geocipher.keystream import ChaoticKey

PLY = """ply
format ascii 1.0
comment made by hand
element vertex 2
property float x
property float y
property float z
property uchar red
element face 0
property list uchar int vertex_indices
end_header
1 2 3 255
4 5 6 0
"""


def test_parse_csv_with_and_without_header():
    np.testing.assert_array_equal(gio.parse_csv("x,y,z\n1,2,3\n4,5,6\n"), [[1, 2, 3], [4, 5, 6]])
    np.testing.assert_array_equal(gio.parse_csv("1,2\n\n3,4\n"), [[1, 2], [3, 4]])


@pytest.mark.parametrize("text", ["", "x,y\n", "1,2\n3\n", "1,a\n2,3\n", "1,nan\n", "1\n2\n"])
def test_parse_csv_errors(text):
    with pytest.raises(gio.ParseError):
        gio.parse_csv(text)


def test_parse_ply():
    np.testing.assert_array_equal(gio.parse_ply(PLY), [[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize("text", [
    "xyz\n",
    "ply\nformat binary_little_endian 1.0\nend_header\n",
    "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nend_header\n1 2\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n",
])
def test_parse_ply_errors(text):
    with pytest.raises(gio.ParseError):
        gio.parse_ply(text)


def test_read_cloud_dispatch(tmp_path):
    (tmp_path / "a.ply").write_text(PLY)
    (tmp_path / "a.csv").write_text("1,2,3\n")
    assert gio.read_cloud(tmp_path / "a.ply").shape == (2, 3)
    assert gio.read_cloud(tmp_path / "a.csv").shape == (1, 3)
    with pytest.raises(gio.ParseError):
        gio.read_cloud(tmp_path / "missing.csv")


@given(arrays(float, st.tuples(st.integers(1, 10), st.sampled_from([2, 3])),
              elements=st.floats(-1e300, 1e300)))
def test_csv_round_trip_is_bit_exact(cloud):
    np.testing.assert_array_equal(gio.parse_csv(gio.format_cloud(cloud)), cloud)


def test_write_is_atomic(tmp_path):
    path = tmp_path / "sub" / "out.csv"
    gio.write_cloud(path, [[1.0, 2.0]])
    assert path.read_text() == "x,y\n1,2\n"
    assert not list(path.parent.glob("*.tmp"))


def test_json_helpers(tmp_path):
    doc = {"a": np.arange(3), "b": np.float64(0.1), "c": np.bool_(True), "d": (np.int64(2),)}
    text = gio.dumps(doc)
    assert json.loads(text) == {"a": [0, 1, 2], "b": 0.1, "c": True, "d": [2]}
    with pytest.raises(ValueError):
        gio.dumps({"x": float("nan")})
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(gio.ParseError):
        gio.read_json(tmp_path / "bad.json")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_float_round_trip(x):
    assert json.loads(gio.dumps({"x": x}))["x"] == x


def test_params_round_trip():
    p = CipherParams(psi=0.05, key=ChaoticKey((0.1, 0.2, 0.3, 0.4, 0.5, 0.6), 4), dimension=2,
                     rounds=2, variant="modified", permutation_source=[[[1, 0, 2, 3, 4, 5, 6, 7]],
                                                                       [[0, 1, 2, 3, 4, 5, 7, 6]]],
                     pool_order="axis-major", perm_direction="scatter", handedness="cw",
                     composition="zyx", rotation_decimals=3)
    doc = gio.params_to_dict(p)
    assert doc["permutation"][0][0][:2] == [2, 1]
    assert gio.params_from_dict(json.loads(gio.dumps(doc))) == p


def test_trace_round_trip(rng):
    plain = rng.normal(size=(11, 3)) * 20
    p = CipherParams(psi=0.1, key=ChaoticKey((0.7, 0.2, -0.6, 0.9, -0.8, -0.7)), rounds=2)
    c, plans, trace = encrypt_pipeline(plain, p)
    doc = json.loads(gio.dumps(gio.trace_to_dict(trace, p)))
    assert doc["schema"] == gio.TRACE_SCHEMA
    params, plans2, sphere, ks, cipher = gio.load_trace(doc)
    np.testing.assert_array_equal(cipher, c)
    np.testing.assert_array_equal(ks.states, trace.keystream.states)
    for a, b in zip(plans, plans2):
        np.testing.assert_array_equal(a.gather_index(), b.gather_index())
    ref = decrypt_solve(c, p, plans, trace.sphere)
    again = decrypt_solve(cipher, params, plans2, sphere, ks)
    assert again.classification == ref.classification
    np.testing.assert_array_equal(again.matrix, ref.matrix)


def test_load_trace_rejects_other_documents():
    with pytest.raises(gio.ParseError):
        gio.load_trace({"schema": gio.REPORT_SCHEMA})
    with pytest.raises(gio.ParseError):
        gio.load_trace({"schema": gio.TRACE_SCHEMA, "params": {}})
