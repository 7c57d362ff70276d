import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachability.corpus import aumann_maschler, identical_states_game, revealing_pays
from approachability.game import GameFormatError, GameSpec, inverse_flag_polytope
from approachability.incomplete_info import (AuxiliaryGame, IIGame, cav_primal, cav_u, identical_states,
                                             matrix_value, nr_polytope, u_of_p, u_value)
from approachability.solvers import enumerate_vertices, simplex_grid

HIDDEN = np.ones((2, 2, 2, 1))  # Player 2 learns nothing


def upper_envelope_1d(xs, ys, x):
    """Upper concave envelope by the monotone-chain hull, evaluated at x."""
    hull = []
    for p in sorted(zip(xs, ys)):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx, hy = zip(*hull)
    return float(np.interp(x, hx, hy))


def test_nr_polytope_shared_signals_is_symmetric():
    g = identical_states([[3, -1], [-2, 1]], K=2, signals=HIDDEN[0])
    P = nr_polytope(g, [0.5, 0.5], np.ones((2, 1)))
    V = enumerate_vertices(P, check_bounded=False)
    swapped = {tuple(np.r_[v[2:], v[:2]]) for v in V}
    assert swapped == {tuple(v) for v in V}


def test_nr_polytope_empty_for_foreign_flag():
    g = aumann_maschler()
    # Player 2 sees the row, so the flag of x repeats x after every column
    assert enumerate_vertices(nr_polytope(g, [0.5, 0.5], np.full((2, 2), 0.5)), check_bounded=False)
    bad = np.array([[2.0, -1.0], [2.0, -1.0]])
    assert enumerate_vertices(nr_polytope(g, [0.5, 0.5], bad), check_bounded=False) == []
    assert u_value(g, [0.5, 0.5], bad) == -np.inf


def test_single_state_reduces_to_inverse_flag_polytope():
    signals = np.array([[[1, 0], [0.5, 0.5]], [[0, 1], [0.5, 0.5]], [[1, 0], [1, 0]]], float)  # (I=3, J=2, S=2)
    g = IIGame(np.zeros((1, 3, 2)), signals[None], [1.0])
    G = g.states[0]
    x = np.array([0.2, 0.3, 0.5])
    mu = g.state_flag(0, x)
    A = {tuple(np.round(v, 9)) for v in enumerate_vertices(nr_polytope(g, [1.0], mu), check_bounded=False)}
    B = {tuple(np.round(v, 9)) for v in enumerate_vertices(inverse_flag_polytope(G, mu), check_bounded=False)}
    assert A == B


@given(st.floats(0.05, 0.95))
def test_identical_states_value_independent_of_prior(p):
    g = identical_states([[3, -1], [-2, 1]], K=2)
    assert u_of_p(g, [p, 1 - p]) == pytest.approx(matrix_value([[3, -1], [-2, 1]]), abs=1e-9)


@given(st.floats(0.05, 0.95))
def test_u_value_against_grid(p):
    g = IIGame([[[1, 0], [0, 0]], [[0, 0], [0, 1]]], HIDDEN, [p, 1 - p])
    mu = np.ones((2, 1))
    X = simplex_grid(2, 400)
    best = max(min((p * x1 @ g.payoffs[0] + (1 - p) * x2 @ g.payoffs[1])) for x1 in X[::4] for x2 in X[::4])
    assert u_value(g, g.prior, mu) >= best - 1e-9
    assert u_value(g, g.prior, mu) == pytest.approx(best, abs=1e-2)


def test_aumann_maschler_values():
    g = aumann_maschler()
    for p in (0.2, 0.5, 0.7):
        assert u_of_p(g, [p, 1 - p]) == pytest.approx(p * (1 - p), abs=1e-9)
    # the exact LP and the flag grid agree
    assert u_of_p(g, [0.3, 0.7], mesh=1 / 20) == pytest.approx(0.21, abs=1e-9)


def test_revealing_only_signals_give_minus_infinity():
    # state k sends signal k whatever happens: nothing is non-revealing inside the simplex
    sig = np.zeros((2, 2, 2, 2))
    sig[0, :, :, 0] = 1
    sig[1, :, :, 1] = 1
    g = IIGame([[[1, 0], [0, 1]], [[0, 1], [1, 0]]], sig, [0.5, 0.5])
    assert u_of_p(g, [0.5, 0.5]) == -np.inf
    assert u_of_p(g, [1.0, 0.0]) == pytest.approx(0.5)
    c = cav_u(g, mesh=1 / 10)
    assert c.value == pytest.approx(0.5, abs=1e-9)


def test_cav_of_concave_u_is_u():
    g = aumann_maschler()
    c = cav_u(g, [0.3, 0.7], mesh=1 / 50)
    assert c.value == pytest.approx(0.21, abs=1e-9)


def test_cav_against_1d_envelope():
    Q = simplex_grid(2, 40)
    p1 = Q[:, 0]
    U = np.minimum(p1, 1 - p1) - 0.8 * np.abs(p1 - 0.5) ** 0.5 * (p1 > 0.3)
    for x in (0.1, 0.37, 0.5, 0.81):
        assert cav_primal(Q, U, [x, 1 - x]) == pytest.approx(upper_envelope_1d(p1, U, x), abs=1e-9)


def test_cav_dominates_u_and_m_dominates_cav():
    g = revealing_pays()
    c = cav_u(g, mesh=1 / 20)
    assert c.value == pytest.approx(0.0, abs=1e-9)
    for q, uq in zip(c.grid, c.u):
        cav_q = cav_primal(c.grid, c.u, q)
        assert uq <= cav_q + 1e-6
        assert cav_q <= c.m @ q + 1e-6


def test_identical_states_cav_and_m():
    g = identical_states_game(3, [0.2, 0.3, 0.5])
    v = matrix_value(g.payoffs[0])
    c = cav_u(g, mesh=1 / 10)
    assert c.value == pytest.approx(v, abs=1e-6)
    assert np.allclose(c.m, v, atol=1e-6)


def test_single_state_cav_is_matrix_value():
    A = [[2.0, -1.0, 0.5], [-1.0, 1.0, 0.0]]
    g = IIGame([A], None, [1.0])
    assert cav_u(g, mesh=1.0).value == pytest.approx(matrix_value(A), abs=1e-6)


def test_auxiliary_game_identical_states():
    A = np.array([[3.0, -1.0], [-2.0, 1.0]])
    g = identical_states(A, K=2)
    v = matrix_value(A)
    aux = AuxiliaryGame(g, np.full(2, v))
    cert = aux.check(mesh=1 / 8)
    assert cert.approachable
    for mu, y in cert.witness_map:
        x = mu[0]  # Player 2 sees the row, so every column's signal law is x
        assert x @ A @ y <= v + 1e-6
    assert AuxiliaryGame(g, np.full(2, v) + 1).check(mesh=1 / 8).approachable
    low = AuxiliaryGame(g, np.full(2, A.min() - 1))
    assert not low.check(mesh=1 / 8).approachable


def test_auxiliary_target_and_penalty():
    g = aumann_maschler()
    aux = AuxiliaryGame(g, [0.3, 0.2])
    assert aux.A == 1.0
    assert np.allclose(aux.target.lo, -2.0) and np.allclose(aux.target.hi, [0.3, 0.2])
    with pytest.raises(ValueError):
        AuxiliaryGame(g, [0.1, np.inf])


def test_auxiliary_for_the_cav_vector_is_approachable():
    g = aumann_maschler()
    c = cav_u(g, mesh=1 / 50)
    assert AuxiliaryGame(g, c.m).check().approachable
    assert not AuxiliaryGame(g, c.m - 0.5).check().approachable


def test_json_round_trip_and_errors(tmp_path):
    g = aumann_maschler([0.3, 0.7])
    path = tmp_path / "ii.json"
    path.write_text(json.dumps(g.to_dict()))
    h = IIGame.load(path)
    assert np.allclose(h.prior, [0.3, 0.7]) and np.array_equal(h.payoffs, g.payoffs)
    with pytest.raises(GameFormatError):
        IIGame.from_dict({"prior": [1.0]})
    with pytest.raises(ValueError):
        g.with_prior([-0.1, 1.1])


def test_transposed_states():
    g = aumann_maschler()
    G = g.states[1]
    assert isinstance(G, GameSpec)
    assert np.array_equal(G.payoffs[:, :, 0], g.payoffs[1].T)
