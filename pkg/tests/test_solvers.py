import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog, nnls

from approachability.corpus import counterexample
from approachability.game import GameSpec, HPolytope
from approachability.geometry import Box, HalfSpace
from approachability.qp import active_set_qp, simplex_least_squares
from approachability.solvers import (UnboundedPolytopeError, batch_min_row, enumerate_vertices, matrix_game_value,
                                     min_max_distance, min_row_value, project_simplex, simplex_grid)

matrices = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000)).map(
    lambda t: np.round(np.random.default_rng(t[2]).normal(size=(t[0], t[1])), 2))


def lp_value(A):
    # row player maximizes v subject to x'A >= v
    n, m = A.shape
    c = np.zeros(n + 1)
    c[-1] = -1
    res = linprog(c, A_ub=np.hstack([-A.T, np.ones((m, 1))]), b_ub=np.zeros(m),
                  A_eq=[[1] * n + [0]], b_eq=[1], bounds=[(0, None)] * n + [(None, None)])
    return -res.fun


@given(matrices)
def test_matrix_game_value_matches_linprog(A):
    res = matrix_game_value(A)
    assert res.value == pytest.approx(lp_value(A), abs=1e-8)
    assert res.saddle_gap(A) <= 1e-8


def test_known_values():
    assert matrix_game_value([[0, 1], [-1, 0]]).value == pytest.approx(0.0)
    rps = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]
    r = matrix_game_value(rps)
    assert r.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(r.optimal_row, 1 / 3)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 10_000))
def test_batch_min_row_matches_single(n_i, n_j, seed):
    M = np.random.default_rng(seed).normal(size=(6, n_i, n_j))
    M[:2] = np.round(M[:2])
    x, v = batch_min_row(M)
    assert np.allclose(x.sum(axis=1), 1) and x.min() >= 0
    for r in range(len(M)):
        ref = min_row_value(M[r]).value
        assert v[r] == pytest.approx(ref, abs=1e-9)
        assert (x[r] @ M[r]).max() == pytest.approx(ref, abs=1e-9)


def test_vertices_of_cube_and_simplex():
    cube = HPolytope.from_arrays(3, A_ub=np.vstack([np.eye(3), -np.eye(3)]), b_ub=np.r_[np.ones(3), np.zeros(3)])
    V = enumerate_vertices(cube)
    assert len(V) == 8
    assert {tuple(v) for v in V} == {(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)}
    assert len(enumerate_vertices(HPolytope.simplex(4))) == 4


def test_empty_and_unbounded():
    P = HPolytope.from_arrays(2, A_eq=[[1, 1]], b_eq=[3], A_ub=-np.eye(2), b_ub=[0, 0])
    P2 = HPolytope.from_arrays(2, A_eq=[[1, 1], [1, -1]], b_eq=[1, 3], A_ub=-np.eye(2), b_ub=[0, 0])
    assert enumerate_vertices(P2) == []
    assert len(enumerate_vertices(P)) == 2
    with pytest.raises(UnboundedPolytopeError):
        enumerate_vertices(HPolytope.from_arrays(2, A_ub=-np.eye(2), b_ub=[0, 0]))


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_project_simplex_against_qp(v):
    v = np.array(v)
    p = project_simplex(v)
    n = len(v)
    q = active_set_qp(np.eye(n), -v, A_eq=np.ones((1, n)), b_eq=[1], A_ub=-np.eye(n), b_ub=np.zeros(n),
                      x0=np.full(n, 1 / n))
    assert np.allclose(p, q, atol=1e-8)


@given(st.integers(0, 10_000))
def test_simplex_least_squares_against_nnls(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(3, 4))
    z = rng.normal(size=3)
    w, Vw = simplex_least_squares(V, z)
    # the simplex constraint enforced by a heavy penalty row
    big = 1e4
    w_ref, _ = nnls(np.vstack([V, big * np.ones(4)]), np.r_[z, big])
    assert np.linalg.norm(Vw - z) <= np.linalg.norm(V @ w_ref - z) + 1e-6


def test_simplex_grid():
    G = simplex_grid(3, 4)
    assert len(G) == 15
    assert np.allclose(G.sum(axis=1), 1)
    assert np.array_equal(G[0], [1, 0, 0])


def test_min_max_distance_counterexample():
    g = counterexample("none")
    verts = np.eye(2)
    x, d = min_max_distance(g, verts, Box([0.0], [0.5]))
    assert d == pytest.approx(0.25, abs=1e-9)
    assert x[0] == pytest.approx(0.75, abs=1e-6)


@given(st.integers(0, 10_000))
def test_min_max_distance_against_grid(seed):
    rng = np.random.default_rng(seed)
    g = GameSpec(rng.normal(size=(3, 2, 2)))
    C = HalfSpace([1.0, 0.5], 0.0)
    verts = np.eye(2)
    _, d = min_max_distance(g, verts, C)
    X = simplex_grid(3, 200)
    Z = np.einsum("xi,vj,ijd->xvd", X, verts, g.payoffs)
    brute = C.distance(Z.reshape(-1, 2)).reshape(len(X), 2).max(axis=1).min()
    assert d <= brute + 1e-9
    assert d >= brute - 0.02
