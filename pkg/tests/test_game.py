import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachability.corpus import counterexample, partial_corpus
from approachability.game import (GameFormatError, GameSpec, check_mixed, expected_payoff, flag_of,
                                  flag_range, inverse_flag_polytope, project_flag_to_range, sample_signals)
from approachability.solvers import enumerate_vertices


def simplex_vectors(n):
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(lambda v: np.array(v) / sum(v))


def test_scalar_payoffs_get_a_trailing_axis():
    g = GameSpec([[0, 1], [-1, 0]])
    assert g.payoffs.shape == (2, 2, 1)
    assert g.is_full_monitoring
    assert g.bound == 1.0


def test_full_monitoring_signals_are_the_column():
    g = GameSpec(np.zeros((2, 3)))
    assert np.array_equal(g.signals[1], np.eye(3))


@pytest.mark.parametrize("signals, msg", [
    ([[[0.5, 0.6]], [[1, 0]]], "shape"),
    ([[[0.5, 0.6], [1, 0]], [[1, 0], [1, 0]]], "probability"),
])
def test_bad_signals_rejected(signals, msg):
    with pytest.raises(GameFormatError, match=msg):
        GameSpec([[0, 1], [-1, 0]], signals)


def test_nonfinite_payoffs_rejected():
    with pytest.raises(GameFormatError):
        GameSpec([[0, np.nan], [1, 0]])


def test_check_mixed():
    assert np.allclose(check_mixed([0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(ValueError):
        check_mixed([0.5, 0.6])
    with pytest.raises(ValueError):
        check_mixed([-0.1, 1.1])


def test_json_round_trip(tmp_path):
    g = partial_corpus()[1].game
    path = tmp_path / "g.json"
    g.save(path)
    h = GameSpec.load(path)
    assert np.array_equal(g.payoffs, h.payoffs) and np.array_equal(g.signals, h.signals)
    assert h.name == g.name


def test_json_errors_name_the_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"payoffs": [[0, 1], [1]]}))
    with pytest.raises(GameFormatError, match="payoffs"):
        GameSpec.load(path)
    path.write_text("{not json")
    with pytest.raises(GameFormatError, match="line 1"):
        GameSpec.load(path)


@given(simplex_vectors(2), simplex_vectors(2))
def test_expected_payoff_is_bilinear(x, y):
    g = counterexample("full")
    assert expected_payoff(g, x, y)[0] == pytest.approx(x[0] * y[1] - x[1] * y[0])


def test_no_signal_game_has_a_single_flag():
    g = counterexample("none")
    assert len(flag_range(g)) == 1
    assert np.allclose(flag_of(g, [0.3, 0.7]), 1.0)


@given(simplex_vectors(3))
def test_inverse_polytope_contains_its_preimage(y):
    signals = np.array([[[1, 0], [0, 1], [0.5, 0.5]], [[1, 0], [1, 0], [0, 1]]], float)
    g = GameSpec(np.zeros((2, 3)), signals)
    P = inverse_flag_polytope(g, flag_of(g, y))
    assert P.contains(y, tol=1e-9)
    for v in enumerate_vertices(P, check_bounded=False):
        assert np.allclose(flag_of(g, v), flag_of(g, y), atol=1e-8)


def test_flag_outside_range_gives_empty_polytope():
    g = partial_corpus()[0].game
    mu = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert enumerate_vertices(inverse_flag_polytope(g, mu), check_bounded=False) == []
    proj = project_flag_to_range(g, mu)
    assert np.allclose(proj, g.signals[:, 0, :])


def test_signal_sampling_frequencies(rng):
    g = partial_corpus()[0].game
    u = rng.random(200_000)
    s = sample_signals(g, np.zeros(200_000, int), np.zeros(200_000, int), u)
    assert abs((s == 0).mean() - 0.75) < 0.005
