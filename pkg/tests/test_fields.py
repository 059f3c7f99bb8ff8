import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracq.errors import DomainError
from fracq.fields import Box3, DecayModel, GridField3


def test_box_geometry():
    b = Box3.cube(2.0, 8)
    assert b.shape == (8, 8, 8)
    assert np.allclose(b.spacing, 0.5)
    assert b.cell_volume == pytest.approx(0.125)
    assert b.points().shape == (512, 3)
    assert b.contains([[0, 0, 0], [3, 0, 0]]).tolist() == [True, False]


def test_box_json_roundtrip():
    b = Box3((1.0, 0.0, -1.0), (1.0, 2.0, 3.0), (8, 16, 4), cell_centered=True)
    assert Box3.from_json(b.to_json()) == b


def test_box_rejects_bad_input():
    with pytest.raises(DomainError):
        Box3.cube(-1.0, 8)
    with pytest.raises(DomainError):
        Box3.cube(1.0, 0)


@given(st.floats(0.1, 10), st.floats(0.5, 4), st.floats(0.1, 50))
def test_decay_model_power_and_log(a, p, r):
    assert DecayModel.power(a, p).radial(r) == pytest.approx(a * r ** -p)
    assert DecayModel.log(a, 1.0).radial(r) == pytest.approx(1.0 - a * math.log(r))
    assert DecayModel.compact().radial(r) == 0.0


def test_decay_model_json_roundtrip():
    m = DecayModel.log(2.0, math.log(2.0), (0.5, 0.0, 0.0))
    assert DecayModel.from_json(m.to_json()) == m


def test_unknown_decay_model():
    with pytest.raises(DomainError):
        DecayModel("exotic")


def _gauss(box):
    return GridField3.from_function(lambda p: np.exp(-np.sum(p * p, axis=1)), box)


def test_field_arithmetic_and_node_lookup():
    box = Box3.cube(1.0, 8)
    f = _gauss(box)
    g = f + f * 2.0 - f
    assert np.allclose(g.values, 2 * f.values)
    node = box.points()[10]
    assert f.at(node) == pytest.approx(math.exp(-node @ node))
    with pytest.raises(DomainError):
        f.at([0.123, 0.0, 0.0])
    with pytest.raises(DomainError):
        f + _gauss(Box3.cube(2.0, 8))


def test_field_rejects_bad_values():
    box = Box3.cube(1.0, 4)
    with pytest.raises(DomainError):
        GridField3(box, np.zeros((4, 4, 3)))
    with pytest.raises(DomainError):
        GridField3(box, np.full((4, 4, 4), np.nan))


def test_gaussian_integral_and_decay_check():
    box = Box3.cube(6.0, 48)
    f = _gauss(box)
    assert f.integral() == pytest.approx(math.pi ** 1.5, rel=1e-10)
    assert f.decay_consistent()
    wide = GridField3.from_function(lambda p: np.ones(len(p)), box)
    assert not wide.decay_consistent()


def test_gf3_roundtrip(tmp_path):
    box = Box3((0.1, 0.2, 0.3), (1.0, 2.0, 1.5), (4, 6, 8))
    rng = np.random.default_rng(1)
    f = GridField3(box, rng.normal(size=box.shape), DecayModel.power(1.5, 2.0, (0.1, 0.2, 0.3)), {"tag": "x"})
    path = tmp_path / "f.gf3"
    f.save(path)
    g = GridField3.load(path)
    assert g.box == box
    assert g.decay_model == f.decay_model
    assert np.array_equal(g.values, f.values)


def test_gf3_rejects_garbage(tmp_path):
    path = tmp_path / "bad.gf3"
    path.write_bytes(b"not a field")
    with pytest.raises(DomainError):
        GridField3.load(path)
