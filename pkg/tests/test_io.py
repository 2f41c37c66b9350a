import numpy as np
import pytest

from clcp import io
from clcp.objective import CannotLinkMatrix
from clcp.synth import SynthSpec, generate

SMALL = SynthSpec(shape=(10, 8, 6), support=(4, 3, 2), seed=2)


def test_tensor_round_trip_bit_exact(tmp_path):
    _, x, _, _ = generate(SMALL)
    io.write_tensor(tmp_path / "t.txt", x)
    y = io.read_tensor(tmp_path / "t.txt")
    assert y.shape == x.shape
    np.testing.assert_array_equal(y.indices, x.indices)
    np.testing.assert_array_equal(y.values, x.values)
    io.write_tensor(tmp_path / "t2.txt", y)
    assert (tmp_path / "t.txt").read_bytes() == (tmp_path / "t2.txt").read_bytes()


def test_model_round_trip_bit_exact(tmp_path):
    truth, _, _, _ = generate(SMALL)
    io.write_model(tmp_path, truth)
    back = io.read_model(tmp_path)
    np.testing.assert_array_equal(back.weights, truth.weights)
    for a, b in zip(back.factors, truth.factors):
        np.testing.assert_array_equal(a, b)
    assert back.bias.sigma == truth.bias.sigma
    for a, b in zip(back.bias.u, truth.bias.u):
        np.testing.assert_array_equal(a, b)


def test_links_round_trip_and_empty_file(tmp_path):
    m = CannotLinkMatrix((4, 3), [(0, 2), (3, 1)])
    io.write_cannot_link(tmp_path / "m.txt", m)
    assert io.read_cannot_link(tmp_path / "m.txt") == m
    (tmp_path / "e.txt").write_text("")
    assert len(io.read_cannot_link(tmp_path / "e.txt", dims=(4, 3))) == 0
    with pytest.raises(io.FormatError):
        io.read_cannot_link(tmp_path / "m.txt", dims=(5, 3))


@pytest.mark.parametrize("body, match", [
    ("dims 2 2\n", "dims"),
    ("dims 2 2 2\n0 0 0\n", ":2:"),
    ("dims 2 2 2\n0 0 x 1\n", ":2:"),
    ("dims 2 2 2\n0 0 5 1\n", "bounds"),
    ("", "empty"),
])
def test_tensor_parse_errors(tmp_path, body, match):
    (tmp_path / "t.txt").write_text(body)
    with pytest.raises(io.FormatError, match=match):
        io.read_tensor(tmp_path / "t.txt")


def test_labels(tmp_path):
    io.write_labels(tmp_path / "l.txt", [0, 1, 1])
    np.testing.assert_array_equal(io.read_labels(tmp_path / "l.txt", 3), [0, 1, 1])
    with pytest.raises(io.FormatError, match="no label"):
        io.read_labels(tmp_path / "l.txt", 4)


def test_keyvalue_and_hash(tmp_path):
    (tmp_path / "c.cfg").write_text("# comment\na = 1\nb = two words\n")
    assert io.read_keyvalue(tmp_path / "c.cfg") == {"a": "1", "b": "two words"}
    (tmp_path / "d.cfg").write_text("a = 1\na = 2\n")
    with pytest.raises(io.FormatError, match="duplicate"):
        io.read_keyvalue(tmp_path / "d.cfg")
    assert io.config_hash({"a": "1", "b": "2"}) == io.config_hash({"b": "2", "a": "1"})
    assert io.config_hash({"a": "1"}) != io.config_hash({"a": "2"})
