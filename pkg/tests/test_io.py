import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from framekit.constructions import counterexample_pair, onb
from framekit.errors import InputError
from framekit.frames import FrameSnapshot, analyze, measure_sequence
from framekit.gabor import GaborLattice
from framekit.index import IndexDecomposition
from framekit.io import (decode_complex, dumps, encode_complex, frame_from_dict,
                         frame_to_dict, loads, matrix_from_dict, matrix_to_dict, read_frame,
                         read_json, read_lattice, read_matrix, read_decomposition,
                         read_sequence, validate_frame_file, write_frame, write_json,
                         write_measure_sequence, write_sequence)
from framekit.sequences import RealSequence


def frame_with_dual(seed=0):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    f = FrameSnapshot(3, V, IndexDecomposition.from_sizes([2, 4, 6], start=1))
    D = analyze(f).dual_vectors
    return FrameSnapshot(3, V, f.decomp, explicit_dual=D)


# -- JSON primitives ---------------------------------------------------------------------


def test_dumps_is_canonical():
    assert dumps({"b": np.float64(0.1), "a": np.int64(3)}) == dumps({"a": 3, "b": 0.1})
    assert json.loads(dumps({"z": 1 + 2j, "f": np.nan, "g": np.inf})) == {
        "z": [1.0, 2.0], "f": None, "g": "inf"}


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip_exact(x):
    assert loads(dumps({"x": x}))["x"] == x


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "a": 1,\n  "b": \n}')
    with pytest.raises(InputError, match=r"line 4, column 1"):
        read_json(p)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_json(tmp_path / "nope.json")


@settings(max_examples=30)
@given(st.integers(1, 5), st.integers(1, 5), st.booleans(), st.integers(0, 10 ** 6))
def test_complex_encoding_round_trip(r, c, cplx, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((r, c)) + (1j * rng.standard_normal((r, c)) if cplx else 0)
    back = decode_complex(loads(dumps(encode_complex(M))))
    np.testing.assert_array_equal(back, M)


# -- frames -------------------------------------------------------------------------------


def test_frame_round_trip_with_dual(tmp_path):
    f = frame_with_dual()
    p = write_frame(tmp_path / "f.json", f)
    g = read_frame(p)
    np.testing.assert_array_equal(g.dense_vectors(), f.dense_vectors())
    np.testing.assert_array_equal(g.explicit_dual, f.explicit_dual)
    assert g.decomp.same_as(f.decomp)


def test_sparse_frame_round_trip(tmp_path):
    pair = counterexample_pair(12)
    p = write_frame(tmp_path / "g.json", pair.G)
    assert "sparse_vectors" in json.loads(p.read_text())
    g = read_frame(p)
    assert sp.issparse(g.vectors)
    assert (g.vectors != sp.csr_matrix(pair.G.vectors)).nnz == 0
    np.testing.assert_allclose(analyze(g).diag_products, analyze(pair.G).diag_products)


def test_sparse_frame_writes_sparse_dual(tmp_path):
    pair = counterexample_pair(12)
    data = json.loads(write_frame(tmp_path / "f.json", pair.F).read_text())
    assert "sparse_dual_vectors" in data and "dual_vectors" not in data
    g = read_frame(tmp_path / "f.json")
    assert (sp.csr_matrix(g.explicit_dual) != sp.csr_matrix(pair.F.explicit_dual)).nnz == 0


def test_bad_entries_listed_with_position(tmp_path):
    data = frame_to_dict(onb(3))
    data["vectors"][0][1] = "x"
    data["vectors"][2][2] = [1.0]
    rep = validate_frame_file(write_json(tmp_path / "bad.json", data))
    assert [e.split(":")[0] for e in rep.schema_errors] == ["vectors/0/1", "vectors/2/2"]


def test_grid_labels_round_trip():
    d = IndexDecomposition.symmetric_boxes(2, dim=2)
    f = FrameSnapshot(25, np.eye(25), d)
    g = frame_from_dict(loads(dumps(frame_to_dict(f))))
    assert g.decomp.same_as(d)


def test_validate_valid_onb(tmp_path):
    p = write_frame(tmp_path / "onb.json", onb(4))
    rep = validate_frame_file(p)
    assert rep.ok and rep.to_dict()["ok"]


def test_validate_wrong_vector_length(tmp_path):
    data = frame_to_dict(onb(3))
    data["vectors"][1] = [0.0, 1.0]
    data["vectors"][2] = [0.0]
    p = write_json(tmp_path / "bad.json", data)
    rep = validate_frame_file(p)
    assert not rep.ok
    assert len(rep.schema_errors) == 2  # every failing row is listed
    with pytest.raises(InputError) as exc:
        read_frame(p)
    assert len(exc.value.problems) == 2


def test_validate_lists_all_schema_failures(tmp_path):
    p = write_json(tmp_path / "bad.json", {"ambient_dim": 0, "block_sizes": [0],
                                           "vectors": "x"})
    rep = validate_frame_file(p)
    assert len(rep.schema_errors) >= 3


def test_validate_dual_count_mismatch(tmp_path):
    data = frame_to_dict(frame_with_dual())
    data["dual_vectors"] = data["dual_vectors"][:-1]
    p = write_json(tmp_path / "dual.json", data)
    rep = validate_frame_file(p)
    assert not rep.schema_errors
    assert rep.invariant_errors and "dual_vectors" in rep.invariant_errors[0]


def test_validate_sparse_out_of_range(tmp_path):
    data = {"ambient_dim": 2, "block_sizes": [1, 2], "sparse_vectors": [[0, 0, 1.0],
                                                                         [1, 5, 1.0]]}
    rep = validate_frame_file(write_json(tmp_path / "s.json", data))
    assert rep.invariant_errors == ["sparse_vectors/1: entry (1, 5) out of range"]


# -- matrices, lattices, decompositions -----------------------------------------------------------


def test_matrix_round_trip_and_shape_check(tmp_path):
    M = np.arange(9.0).reshape(3, 3) * (1 + 1j)
    p = write_json(tmp_path / "m.json", matrix_to_dict(M))
    np.testing.assert_array_equal(read_matrix(p), M)
    with pytest.raises(InputError):
        matrix_from_dict({"dim": 2, "entries": [[1.0, 2.0, 3.0]]})


def test_read_matrix_from_frame_file(tmp_path):
    f = frame_with_dual()
    p = write_frame(tmp_path / "f.json", f)
    np.testing.assert_allclose(read_matrix(p), f.gram())


def test_lattice_round_trip(tmp_path):
    lat = GaborLattice.regular(8, 2, 4).with_phases(np.exp(1j * np.arange(8)))
    p = write_json(tmp_path / "l.json", lat.to_dict())
    back = read_lattice(p)
    np.testing.assert_array_equal(back.points, lat.points)
    np.testing.assert_allclose(back.phases, lat.phases, atol=0)
    bad = write_json(tmp_path / "bad.json", {"N": 8, "points": [[0.5, 1]]})
    with pytest.raises(InputError):
        read_lattice(bad)


def test_decomposition_round_trip(tmp_path):
    d = IndexDecomposition.symmetric_boxes(4)
    p = write_json(tmp_path / "d.json", d.to_dict())
    assert read_decomposition(p).same_as(d)
    bad = write_json(tmp_path / "bad.json", {"labels": [1, 2], "block_sizes": [3]})
    with pytest.raises(InputError):
        read_decomposition(bad)


# -- CSV --------------------------------------------------------------------------------------------


@settings(max_examples=40)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_sequence_csv_round_trip(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("csv") / "x.csv"
    x = RealSequence(np.array(vals), np.arange(1, len(vals) + 1) * 3)
    write_sequence(p, x)
    y = read_sequence(p)
    np.testing.assert_array_equal(y.values, x.values)
    np.testing.assert_array_equal(y.sizes, x.sizes)


def test_sequence_csv_header_and_format(tmp_path):
    p = write_sequence(tmp_path / "x.csv", RealSequence([0.1, 1 / 3], [1, 2]))
    assert p.read_text().splitlines() == ["n,|I_n|,x_n", "1,1,0.10000000000000001",
                                          "2,2,0.33333333333333331"]


@pytest.mark.parametrize("body,where", [
    ("n,|I_n|,x_n\n1,1,0.5\n2,2\n", "line 3"),
    ("1,1,0.5\n2,x,1\n", "line 2"),
    ("1,1,0.5\n3,2,1\n", "line 2"),
    ("n,|I_n|,x_n\n", "no data"),
    ("1,2,0\n2,1,0\n", "decreas"),
])
def test_sequence_csv_errors(tmp_path, body, where):
    p = tmp_path / "x.csv"
    p.write_text(body)
    with pytest.raises(InputError, match=where):
        read_sequence(p)


def test_measure_sequence_csv(tmp_path):
    ms = measure_sequence(analyze(onb(3)))
    p = write_measure_sequence(tmp_path / "a.csv", ms)
    assert p.read_text().splitlines() == ["n,|I_n|,a_n,b_n,stable", "1,1,1,1,1", "2,2,1,2,1",
                                          "3,3,1,3,1"]
