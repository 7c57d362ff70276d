import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachability.geometry import Ball, Box, HalfSpace, Polytope, dump_target, target_from_dict
from approachability.game import GameFormatError

points = st.lists(st.floats(-5, 5), min_size=2, max_size=2).map(np.array)

TARGETS = [
    Box([0.0, -1.0], [0.5, 1.0]),
    Box([-np.inf, -np.inf], [0.0, 0.0]),
    HalfSpace([1.0, 1.0], 0.5),
    Ball([1.0, 0.0], 0.7),
    Polytope([[1, 0], [0, 1], [-1, -1]], [1, 1, 0]),
]


@pytest.mark.parametrize("C", TARGETS, ids=repr)
@given(z=points)
def test_projection_is_idempotent_and_closest(C, z):
    p = C.project(z)
    assert C.contains(p, tol=1e-7)
    assert np.allclose(C.project(p), p, atol=1e-7)
    assert C.distance(z) == pytest.approx(np.linalg.norm(z - p), abs=1e-9)
    # no random point of C is closer
    rng = np.random.default_rng(0)
    for _ in range(20):
        q = C.project(p + rng.normal(size=2))
        assert np.linalg.norm(z - q) >= np.linalg.norm(z - p) - 1e-7


@pytest.mark.parametrize("C", TARGETS, ids=repr)
@given(z=points, w=points)
def test_projection_is_nonexpansive(C, z, w):
    assert np.linalg.norm(C.project(z) - C.project(w)) <= np.linalg.norm(z - w) + 1e-7


def test_box_distance_closed_form():
    C = Box([0.0], [0.5])
    assert C.distance(np.array([[1.0], [-0.25], [0.2]])) == pytest.approx([0.5, 0.25, 0.0])


def test_facets_describe_the_set():
    C = Box([0.0, -1.0], [0.5, np.inf])
    facets = C.facets()
    assert len(facets) == 3
    for a, b in facets:
        assert np.linalg.norm(a) > 0
    assert not Ball([0, 0], 1).polyhedral


def test_delta_complement():
    D = Box([0.0], [0.5]).delta_complement(0.1)
    assert D.contains(np.array([0.7]))
    assert not D.contains(np.array([0.55]))


@pytest.mark.parametrize("C", TARGETS, ids=repr)
def test_json_round_trip(C):
    import json

    back = target_from_dict(json.loads(dump_target(C)))
    z = np.array([[2.0, -3.0], [0.1, 0.1]])
    assert np.allclose(back.distance(z), C.distance(z))


def test_bad_target_json():
    with pytest.raises(GameFormatError):
        target_from_dict({"type": "box", "lo": [0]})
    with pytest.raises(GameFormatError):
        target_from_dict({"type": "cone"})
