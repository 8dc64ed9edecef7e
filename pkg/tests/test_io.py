import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scvolterra import io
from scvolterra.complex import Sc2
from scvolterra.model import GeneratorConfig, generate


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_dense_roundtrip_bit_exact(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("dense") / "a.csv"
    io.write_dense(path, a)
    back = io.read_dense(path)
    assert back.shape == a.shape
    assert np.array_equal(back.view(np.int64), a.view(np.int64))


def test_kernel_roundtrip(tmp_path):
    inst = generate(GeneratorConfig(n=9, r=4, edge_prob=0.6, seed=2))
    io.write_sparse_h1(tmp_path / "h1.csv", inst.h1)
    io.write_sparse_h2(tmp_path / "h2.csv", inst.h2)
    assert np.array_equal(io.read_sparse_h1(tmp_path / "h1.csv", 9), inst.h1.values)
    assert np.array_equal(io.read_sparse_h2(tmp_path / "h2.csv", 9), inst.h2.values)


def test_sc2_roundtrip(tmp_path):
    inst = generate(GeneratorConfig(n=9, r=4, edge_prob=0.6, seed=2))
    io.write_sc2(tmp_path / "e.csv", tmp_path / "t.csv", inst.truth)
    back = io.read_sc2(9, tmp_path / "e.csv", tmp_path / "t.csv")
    assert dict(back.edges) == dict(inst.truth.edges)
    assert dict(back.triangles) == dict(inst.truth.triangles)


def test_empty_sc2_has_headers(tmp_path):
    io.write_sc2(tmp_path / "e.csv", tmp_path / "t.csv", Sc2(4))
    assert (tmp_path / "e.csv").read_text() == "i,j,w\n"
    assert (tmp_path / "t.csv").read_text() == "i,j,k,w\n"


@pytest.mark.parametrize(
    "text,match",
    [
        ("i,j\n0,1\n", "expected header"),
        ("i,j,w\n0,1\n", "row 1"),
        ("i,j,w\n0,x,1.0\n", "integer"),
        ("i,j,w\n0,1,inf\n", "non-finite"),
        ("i,j,w\n2,2,1.0\n", "self-loop"),
    ],
)
def test_edge_file_errors(tmp_path, text, match):
    (tmp_path / "e.csv").write_text(text)
    with pytest.raises(io.InputError, match=match):
        io.read_sc2(4, tmp_path / "e.csv")


def test_triangle_without_edge(tmp_path):
    (tmp_path / "e.csv").write_text("i,j,w\n0,1,1.0\n0,2,1.0\n")
    (tmp_path / "t.csv").write_text("i,j,k,w\n0,1,2,0.5\n")
    with pytest.raises(io.InputError, match="lacks edge"):
        io.read_sc2(3, tmp_path / "e.csv", tmp_path / "t.csv")


def test_missing_file_named(tmp_path):
    with pytest.raises(io.InputError, match="nope.csv"):
        io.read_dense(tmp_path / "nope.csv")


def test_ragged_dense(tmp_path):
    (tmp_path / "x.csv").write_text("1,2,3\n4,5\n")
    with pytest.raises(io.InputError, match="row 1"):
        io.read_dense(tmp_path / "x.csv")


def test_read_config(tmp_path):
    (tmp_path / "c.cfg").write_text(
        "# comment\nsolver.alpha = 0.1  # trailing\n\ngenerator.n=7\n"
    )
    assert io.read_config(tmp_path / "c.cfg") == {"solver.alpha": "0.1", "generator.n": "7"}
    (tmp_path / "bad.cfg").write_text("solver.alpha 0.1\n")
    with pytest.raises(io.InputError, match="line 1"):
        io.read_config(tmp_path / "bad.cfg")
