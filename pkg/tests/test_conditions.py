import json

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from approachability.conditions import (APPROACHABLE, NOT_APPROACHABLE, batch_bset_response, bset_response,
                                        check_convex_full, check_convex_partial, grid_flags,
                                        halfspace_dichotomy)
from approachability.corpus import COUNTEREXAMPLE_TARGET, blackwell_corpus, counterexample, full_corpus
from approachability.game import GameSpec
from approachability.geometry import Ball, Box, HalfSpace


def test_counterexample_without_signals_is_not_approachable():
    cert = check_convex_partial(counterexample("none"), COUNTEREXAMPLE_TARGET)
    assert cert.verdict == NOT_APPROACHABLE
    assert cert.deficit == pytest.approx(0.25, abs=1e-6)
    assert cert.meshes[0] == pytest.approx(1 / 64)
    assert cert.stable


def test_counterexample_with_full_monitoring_is_approachable():
    g = counterexample("full")
    assert check_convex_full(g, COUNTEREXAMPLE_TARGET).approachable
    cert = check_convex_partial(g, COUNTEREXAMPLE_TARGET)
    assert cert.approachable
    assert cert.witness_map and all(np.isclose(x.sum(), 1) for _, x in cert.witness_map)


@pytest.mark.parametrize("H, row", [(HalfSpace([1.0], 0.0), 1), (HalfSpace([-1.0], 0.0), 0)])
def test_both_half_lines_are_approachable_without_signals(H, row):
    # with the printed matrix, B keeps payoffs <= 0 and T keeps them >= 0
    v = halfspace_dichotomy(counterexample("none"), H)
    assert v.kind == "approachable_by_1"
    _, x = v.witness_map[0]
    assert x[row] == pytest.approx(1.0, abs=1e-6)


def test_far_half_line_is_excludable():
    v = halfspace_dichotomy(counterexample("none"), HalfSpace([1.0], -0.1))
    assert v.kind == "excludable_by_2"
    assert v.delta > 0
    with pytest.raises(TypeError):
        halfspace_dichotomy(counterexample("none"), Box([0.0], [1.0]))


def test_facets_are_not_enough():
    # every facet of the box is approachable, the box is not
    inst = [i for i in full_corpus() if i.name == "split_box"][0]
    cert = check_convex_full(inst.game, inst.target)
    assert not cert.approachable
    assert cert.deficit == pytest.approx(0.2 * np.sqrt(2), abs=1e-6)
    for a, b in inst.target.facets():
        assert check_convex_full(inst.game, HalfSpace(a, b)).approachable


def test_ball_target_uses_the_grid_path():
    g = counterexample("full")
    assert check_convex_full(g, Ball([0.2], 0.3)).approachable
    cert = check_convex_full(g, Ball([0.8], 0.1))
    assert not cert.approachable
    assert cert.deficit == pytest.approx(0.7, abs=1e-3)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        check_convex_partial(counterexample("none"), Box([0, 0], [1, 1]))


def test_certificate_serializes():
    cert = check_convex_partial(counterexample("none"), COUNTEREXAMPLE_TARGET)
    data = json.loads(json.dumps(cert.to_dict()))
    assert data["verdict"] == NOT_APPROACHABLE and "failing_flag" in data


def test_grid_flags_are_sorted_and_unique():
    flags, reps = grid_flags(counterexample("full"), 4)[:2]
    keys = [tuple(np.round(f.reshape(-1), 9)) for f in flags]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_bset_response_examples():
    g = counterexample("full")
    x, val = bset_response(g, COUNTEREXAMPLE_TARGET, [1.0])
    assert np.allclose(x, [0, 1]) and val == pytest.approx(-0.25)
    x, _ = bset_response(g, COUNTEREXAMPLE_TARGET, [-1.0])
    assert np.allclose(x, [1, 0])
    x, val = bset_response(g, COUNTEREXAMPLE_TARGET, [0.3])
    assert np.allclose(x, 0.5) and val == 0.0


@pytest.mark.parametrize("inst", blackwell_corpus(), ids=lambda i: i.name)
@given(z=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
@example(z=[1e-7, 1e-7, 1e-7])  # barely outside: solver tolerances must not depend on the scale
def test_bset_response_separates(inst, z):
    g, C = inst.game, inst.target
    z = np.array(z[:g.payoff_dim])
    x, _ = bset_response(g, C, z)
    p = C.project(z)
    worst = max(np.dot(z - p, x @ g.payoffs[:, j] - p) for j in range(g.num_actions_p2))
    assert worst <= 1e-9
    xb = batch_bset_response(g, C, z[None])[0]
    worst_b = max(np.dot(z - p, xb @ g.payoffs[:, j] - p) for j in range(g.num_actions_p2))
    assert worst_b <= 1e-9


@given(lo=st.floats(-1, 0.4), width=st.floats(0.0, 1.5))
def test_supersets_of_approachable_sets_are_approachable(lo, width):
    g = counterexample("none")
    C = Box([lo], [lo + width])
    small = check_convex_partial(g, C, mesh=1 / 16, refine=False)
    big = check_convex_partial(g, Box([lo - 0.2], [lo + width + 0.2]), mesh=1 / 16, refine=False)
    if small.approachable:
        assert big.approachable
    assert big.deficit <= small.deficit + 1e-9
    # no signal: one flag, so the deficit is the minimax over rows of the distance
    exact = min(max(C.distance(np.array([[t]]))[0], C.distance(np.array([[t - 1]]))[0]) for t in np.linspace(0, 1, 2001))
    assert small.deficit == pytest.approx(exact, abs=1e-3)


def test_noisy_signals_keep_the_counterexample_approachable():
    noisy = GameSpec([[0, 1], [-1, 0]], [[[0.75, 0.25], [0.25, 0.75]]] * 2)
    assert check_convex_partial(noisy, COUNTEREXAMPLE_TARGET).verdict == APPROACHABLE
