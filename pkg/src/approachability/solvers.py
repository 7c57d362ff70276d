"""Numerical kernels: matrix-game values, vertex enumeration, min-max distance."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar

from .game import GameSpec, HPolytope, dedupe_points
from .geometry import ConvexTarget

PIVOT_TOL = 1e-9
VERTEX_TOL = 1e-9


@dataclass(frozen=True)
class GameValueResult:
    """Value of a zero-sum matrix game where the row player maximizes."""

    value: float
    optimal_row: np.ndarray
    optimal_col: np.ndarray

    def saddle_gap(self, A) -> float:
        A = np.asarray(A, dtype=float)
        return float((A @ self.optimal_col).max() - (self.optimal_row @ A).min())


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def matrix_game_value(A) -> GameValueResult:
    """Solve max_x min_y x'Ay by a dense tableau simplex with Bland's rule.

    The matrix is shifted to be positive and the column player's program
    ``max 1'y  s.t.  P y <= 1, y >= 0`` is solved from the slack basis; the
    row strategy is read off the slack reduced costs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix game entries must be finite")
    m, n = A.shape
    shift = 1.0 - A.min()
    P = A + shift

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = P
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -1.0
    basis = list(range(n, n + m))

    for _ in range(50 * (n + m) + 100):
        entering = next((c for c in range(n + m) if T[m, c] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = T[:m, entering]
        best_row, best_ratio = None, np.inf
        for r in range(m):
            if col[r] > PIVOT_TOL:
                ratio = T[r, -1] / col[r]
                if ratio < best_ratio - 1e-15 or (
                        abs(ratio - best_ratio) <= 1e-15 and basis[r] < basis[best_row]):
                    best_row, best_ratio = r, ratio
        if best_row is None:  # cannot happen: the program is bounded
            raise RuntimeError("unbounded matrix-game program")
        _pivot(T, best_row, entering)
        basis[best_row] = entering
    else:
        raise RuntimeError("simplex iteration limit reached")

    y = np.zeros(n + m)
    for r, b in enumerate(basis):
        y[b] = T[r, -1]
    total = T[m, -1]
    col_strat = np.clip(y[:n], 0.0, None)
    row_strat = np.clip(T[m, n:n + m], 0.0, None)
    col_strat /= col_strat.sum()
    row_strat /= row_strat.sum()
    return GameValueResult(float(1.0 / total - shift), row_strat, col_strat)


def min_row_value(M) -> GameValueResult:
    """Value of min_x max_y x'My (row player minimizes).

    The returned ``value`` is the minimizer's value and ``optimal_row`` its
    strategy; ``optimal_col`` is the column player's maximizing strategy.
    """
    res = matrix_game_value(-np.asarray(M, dtype=float))
    return GameValueResult(-res.value, res.optimal_row, res.optimal_col)


_CANDIDATES: dict[tuple[int, int], list] = {}


def _candidate_sets(n_rows, n_cols):
    key = (n_rows, n_cols)
    if key not in _CANDIDATES:
        # active constraints: column j tight (j < n_cols) or x_i = 0
        _CANDIDATES[key] = list(itertools.combinations(range(n_cols + n_rows), n_rows))
    return _CANDIDATES[key]


def _batch_min_row_two(M):
    """Two rows: f(t) = max_j t M[0, j] + (1 - t) M[1, j] is piecewise linear in t = x_T.

    Its minimum sits at an endpoint or where two columns cross.
    """
    a, b = M[:, 0, :], M[:, 1, :]
    slope = a - b
    cands = [np.zeros(len(M)), np.ones(len(M))]
    n_j = M.shape[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n_j):
            for k in range(j + 1, n_j):
                t = (b[:, k] - b[:, j]) / (slope[:, j] - slope[:, k])
                cands.append(np.where(np.isfinite(t), np.clip(t, 0.0, 1.0), 0.0))
    T = np.stack(cands, axis=1)
    F = (T[:, :, None] * slope[:, None, :] + b[:, None, :]).max(axis=2)
    best = np.argmin(F, axis=1)
    t = T[np.arange(len(M)), best]
    return np.stack([t, 1.0 - t], axis=1), F[np.arange(len(M)), best]


def _batch_min_row_three(M):
    """Three rows: the minimum of a convex piecewise-linear function on a triangle
    lies on an edge or where three columns cross inside.
    """
    R, _, n_j = M.shape
    xs, vals = [], []
    for a, b in ((0, 1), (0, 2), (1, 2)):
        e, v = _batch_min_row_two(M[:, [a, b], :])
        x = np.zeros((R, 3))
        x[:, a], x[:, b] = e[:, 0], e[:, 1]
        xs.append(x)
        vals.append(v)
    for j, k, l in itertools.combinations(range(n_j), 3):
        # x is orthogonal to M_j - M_k and M_j - M_l
        x = np.cross(M[:, :, j] - M[:, :, k], M[:, :, j] - M[:, :, l])
        tot = x.sum(axis=1, keepdims=True)
        good = np.abs(tot[:, 0]) > 1e-12
        x = np.where(good[:, None], x / np.where(good[:, None], tot, 1.0), 1.0 / 3.0)
        good &= x.min(axis=1) >= -1e-12
        x = np.clip(x, 0.0, None)
        x /= x.sum(axis=1, keepdims=True)
        v = np.einsum("ri,rij->rj", x, M).max(axis=1)
        xs.append(x)
        vals.append(np.where(good, v, np.inf))
    V = np.stack(vals)
    first = np.argmax(V <= V.min(axis=0)[None, :] + 1e-12, axis=0)
    X = np.stack(xs)
    return X[first, np.arange(R)], V[first, np.arange(R)]


def batch_min_row(M, tol=1e-9):
    """Row minimizer strategies for a batch of small matrix games.

    Two- and three-row games use closed-form candidate sets; otherwise
    the vertices of {(x, t): x in simplex, t >= (x'M)_j} are enumerated.
    ``M`` has shape (R, I, J).

    Returns:
        (x, value) with shapes (R, I) and (R,).
    """
    M = np.asarray(M, dtype=float)
    R, n_i, n_j = M.shape
    if n_i == 1:
        return np.ones((R, 1)), M[:, 0, :].max(axis=1)
    if n_i == 2:
        return _batch_min_row_two(M)
    if n_i == 3:
        return _batch_min_row_three(M)
    subsets = _candidate_sets(n_i, n_j)
    S = len(subsets)
    K = np.zeros((S, R, n_i + 1, n_i + 1))
    K[:, :, 0, :n_i] = 1.0
    for s, subset in enumerate(subsets):
        for r, c in enumerate(subset, start=1):
            if c < n_j:
                K[s, :, r, :n_i] = M[:, :, c]
                K[s, :, r, n_i] = -1.0
            else:
                K[s, :, r, c - n_j] = 1.0
    K = K.reshape(S * R, n_i + 1, n_i + 1)
    ok = np.abs(np.linalg.det(K)) > 1e-12
    rhs = np.zeros((S * R, n_i + 1, 1))
    rhs[:, 0] = 1.0
    K[~ok] = np.eye(n_i + 1)
    x = np.linalg.solve(K, rhs)[:, :n_i, 0].reshape(S, R, n_i)
    ok = ok.reshape(S, R) & (x.min(axis=2) >= -tol)
    x = np.clip(x, 0.0, None)
    x /= np.maximum(x.sum(axis=2, keepdims=True), 1e-300)
    val = np.einsum("sri,rij->srj", x, M).max(axis=2)
    val[~ok] = np.inf
    # first subset attaining the minimum, as in a sequential scan
    vmin = val.min(axis=0)
    first = np.argmax(val <= vmin[None, :] + 1e-12, axis=0)
    return x[first, np.arange(R)], val[first, np.arange(R)]


def _nullspace(A, tol=1e-10):
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = np.linalg.svd(A)
    rank = int((s > tol * max(1.0, s.max() if s.size else 0.0)).sum())
    return vt[rank:].T


def _is_bounded(G):
    """True iff {z : G z <= 0} = {0}."""
    k = G.shape[1]
    if k == 0:
        return True
    if G.shape[0] == 0:
        return False
    for sign in (1.0, -1.0):
        for c in range(k):
            obj = np.zeros(k)
            obj[c] = -sign
            res = linprog(obj, A_ub=G, b_ub=np.zeros(G.shape[0]), bounds=[(-1, 1)] * k, method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                return False
    return True


class UnboundedPolytopeError(ValueError):
    pass


def enumerate_vertices(P: HPolytope, tol: float = VERTEX_TOL, check_bounded: bool = True) -> list[np.ndarray]:
    """All vertices of a bounded H-polytope (empty list iff it is empty).

    Equalities are eliminated through a particular solution plus null-space
    basis; vertices are then the feasible points where ``k`` linearly
    independent inequalities are tight, ``k`` being the remaining dimension.
    """
    n = P.dim
    if P.A_eq.shape[0]:
        x0, *_ = np.linalg.lstsq(P.A_eq, P.b_eq, rcond=None)
        if np.abs(P.A_eq @ x0 - P.b_eq).max() > tol:
            return []
        N = _nullspace(P.A_eq)
    else:
        x0, N = np.zeros(n), np.eye(n)
    k = N.shape[1]
    G = P.A_ub @ N
    h = P.b_ub - P.A_ub @ x0
    if check_bounded and not _is_bounded(G):
        raise UnboundedPolytopeError("vertex enumeration needs a bounded polytope")
    if k == 0:
        return [np.where(np.abs(x0) < 1e-14, 0.0, x0)] if np.all(h >= -tol) else []
    # drop rows that vanish on the affine hull
    keep = np.linalg.norm(G, axis=1) > 1e-12
    if np.any(h[~keep] < -tol):
        return []
    G, h = G[keep], h[keep]
    found = []
    for rows in itertools.combinations(range(G.shape[0]), k):
        Gs = G[list(rows)]
        if abs(np.linalg.det(Gs)) < 1e-12:
            continue
        z = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ z <= h + tol):
            x = x0 + N @ z
            found.append(np.where(np.abs(x) < 1e-14, 0.0, x))
    return dedupe_points(found, tol)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def simplex_grid(n: int, steps: int) -> np.ndarray:
    """All points of Delta(n) with coordinates in (1/steps)Z, lexicographic order."""
    pts = []
    for comp in itertools.product(range(steps + 1), repeat=n - 1):
        s = sum(comp)
        if s <= steps:
            pts.append(list(comp) + [steps - s])
    return np.array(pts, dtype=float)[::-1] / steps


class MinMaxProblem:
    """f(x) = max_v d_C(rho(x, v)) over a finite set of opponent mixed actions.

    f is convex on Delta(I): each term is a convex function composed with an
    affine map.
    """

    def __init__(self, game: GameSpec, verts, C: ConvexTarget):
        verts = np.atleast_2d(np.asarray(verts, dtype=float))
        if verts.shape[0] == 0:
            raise ValueError("min_max_distance needs at least one opponent vertex")
        self.C = C
        self.n = game.num_actions_p1
        # R[v] is the (I, d) matrix x -> rho(x, v)
        self.R = np.einsum("vj,ijd->vid", verts, game.payoffs)

    @classmethod
    def from_matrices(cls, R, C):
        obj = cls.__new__(cls)
        obj.C, obj.R, obj.n = C, np.asarray(R, float), np.asarray(R).shape[1]
        return obj

    def values(self, x):
        return self.C.distance(np.einsum("i,vid->vd", x, self.R))

    def __call__(self, x) -> float:
        return float(self.values(x).max())

    def batch(self, X) -> np.ndarray:
        Z = np.einsum("ni,vid->nvd", X, self.R)
        d = self.C.distance(Z.reshape(-1, Z.shape[-1])).reshape(Z.shape[:2])
        return d.max(axis=1)

    def subgradient(self, x):
        Z = np.einsum("i,vid->vd", x, self.R)
        P = self.C.project(Z)
        d = np.sqrt(((Z - P) ** 2).sum(axis=1))
        v = int(np.argmax(d))
        if d[v] <= 0:
            return 0.0, np.zeros(self.n)
        return float(d[v]), self.R[v] @ ((Z[v] - P[v]) / d[v])

    def squared_terms(self, x):
        Z = np.einsum("i,vid->vd", x, self.R)
        diff = Z - self.C.project(Z)
        return (diff ** 2).sum(axis=1), 2.0 * np.einsum("vid,vd->vi", self.R, diff)


def _subgradient_descent(prob: MinMaxProblem, x, iters):
    """Projected subgradient with Polyak steps towards an adaptive target level."""
    f_best, g = prob.subgradient(x)
    x_best = x.copy()
    delta = max(f_best, 1e-3) / 2.0
    stall = 0
    for _ in range(iters):
        f, g = prob.subgradient(x)
        if f < f_best - 1e-15:
            f_best, x_best, stall = f, x.copy(), 0
        else:
            stall += 1
            if stall >= 5:
                delta /= 2.0
                stall = 0
        if f_best <= 0.0:
            break
        gn = float(g @ g)
        if gn <= 1e-300:
            break
        target = max(f_best - delta, 0.0)
        x = project_simplex(x - (f - target) / gn * g)
    return x_best, f_best


def _smooth_polish(prob: MinMaxProblem, x):
    """SLSQP on the epigraph of the squared distances (continuously differentiable)."""
    n = prob.n

    def cons(w):
        sq, _ = prob.squared_terms(w[:n])
        return w[n] - sq

    def cons_jac(w):
        _, grad = prob.squared_terms(w[:n])
        return np.hstack([-grad, np.ones((grad.shape[0], 1))])

    sq0, _ = prob.squared_terms(x)
    w0 = np.concatenate([x, [sq0.max()]])
    res = minimize(lambda w: w[n], w0, jac=lambda w: np.eye(n + 1)[n], method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac},
                                {"type": "eq", "fun": lambda w: w[:n].sum() - 1.0,
                                 "jac": lambda w: np.concatenate([np.ones(n), [0.0]])}],
                   bounds=[(0.0, 1.0)] * n + [(0.0, None)],
                   options={"ftol": 1e-14, "maxiter": 200})
    xs = np.clip(res.x[:n], 0.0, None)
    return xs / xs.sum()


def min_max_distance(game: GameSpec, verts, C: ConvexTarget, tol: float = 1e-6, x0=None,
                     quick: bool = False, problem: MinMaxProblem | None = None):
    """Minimize f(x) = max_v d_C(rho(x, v)) over Delta(I).

    Multi-start projected subgradient (pure actions, barycenter and an
    optional warm start), then a smooth epigraph polish; for |I| = 2 an exact
    one-dimensional search and for |I| = 3 a simplex-grid pass refine further.

    Args:
        game: the game.
        verts: opponent mixed actions (typically vertices of s^{-1}(mu)).
        C: target set.
        tol: optimizer tolerance; the result is within ``tol`` of the minimum.
        x0: optional warm start.
        quick: only evaluate the starts and run a short subgradient pass;
            the returned value is then an upper bound on the minimum.

    Returns:
        (x_star, delta) with delta = f(x_star).
    """
    prob = problem if problem is not None else MinMaxProblem(game, verts, C)
    n = prob.n
    starts = [np.eye(n)[i] for i in range(n)] + [np.full(n, 1.0 / n)]
    if x0 is not None:
        starts.insert(0, np.asarray(x0, dtype=float))
    vals = prob.batch(np.array(starts))
    order = np.argsort(vals, kind="stable")
    x_best, f_best = starts[order[0]].copy(), float(vals[order[0]])
    if f_best <= 0.0 or n == 1:
        return x_best, f_best

    def consider(x):
        nonlocal x_best, f_best
        f = prob(x)
        if f < f_best:
            x_best, f_best = x, f

    if quick:
        x, f = _subgradient_descent(prob, x_best, 40)
        consider(x)
        return x_best, f_best

    for k in order[:min(len(order), n + 2)]:
        x, f = _subgradient_descent(prob, starts[k].copy(), 60)
        consider(x)
        if f_best <= 0.0:
            return x_best, f_best
    if n == 2:
        res = minimize_scalar(lambda t: prob(np.array([t, 1.0 - t])), bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-12})
        consider(np.array([res.x, 1.0 - res.x]))
        # the bounded search never evaluates the endpoints exactly
        consider(np.array([1.0, 0.0]))
        consider(np.array([0.0, 1.0]))
    elif n == 3:
        grid = simplex_grid(3, 24)
        gv = prob.batch(grid)
        consider(grid[int(np.argmin(gv))].copy())
    if f_best > tol * 1e-3:
        consider(_smooth_polish(prob, x_best))
    return x_best, f_best
