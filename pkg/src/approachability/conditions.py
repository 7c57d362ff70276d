"""Approachability checkers for convex targets, with certificates.

``check_convex_full`` decides Blackwell's full-monitoring condition
(every P^2(y) meets C); ``check_convex_partial`` decides the flag condition
(for every realizable flag mu some x keeps every compatible payoff in C).
Verdicts from grids are stable-under-refinement rather than certified: the
certificate records the meshes that were tried.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, flag_of, inverse_flag_polytope, uniform
from .geometry import ConvexTarget, HalfSpace
from .solvers import (MinMaxProblem, enumerate_vertices, min_max_distance, min_row_value,
                      simplex_grid)

APPROACHABLE = "approachable"
NOT_APPROACHABLE = "not_approachable"
DEFAULT_MESH = 1.0 / 64
DEFAULT_TOL = 1e-6


@dataclass
class Certificate:
    verdict: str
    deficit: float = 0.0
    witness_map: list | None = None
    failing_flag: np.ndarray | None = None
    mesh: float | None = None
    excluding_action: np.ndarray | None = None
    meshes: list = field(default_factory=list)
    stable: bool = True
    method: str = ""

    @property
    def approachable(self) -> bool:
        return self.verdict == APPROACHABLE

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "deficit": float(self.deficit), "mesh": self.mesh,
               "meshes": list(self.meshes), "stable_under_refinement": self.stable,
               "method": self.method}
        if self.failing_flag is not None:
            out["failing_flag"] = np.asarray(self.failing_flag).tolist()
        if self.excluding_action is not None:
            out["excluding_action"] = np.asarray(self.excluding_action).tolist()
        if self.witness_map is not None:
            out["witness"] = [{"flag": np.asarray(mu).tolist(), "x": np.asarray(x).tolist()}
                              for mu, x in self.witness_map]
        return out


def _steps(mesh: float) -> int:
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    return max(1, int(round(1.0 / mesh)))


def _simplex_moves(n):
    return [(a, b) for a in range(n) for b in range(n) if a != b]


def refine_max(func, y0, h0, h_min=1e-7):
    """Pattern search maximizing ``func`` over the simplex from ``y0``.

    Moves transfer mass between two coordinates; the step halves whenever no
    move improves.  Returns (y, value).
    """
    y = np.asarray(y0, dtype=float).copy()
    best = func(y)
    h = h0
    moves = _simplex_moves(y.size)
    while h >= h_min:
        improved = False
        for a, b in moves:
            step = min(h, y[b])
            if step <= 0:
                continue
            cand = y.copy()
            cand[a] += step
            cand[b] -= step
            val = func(cand)
            if val > best + 1e-13:
                y, best, improved = cand, val, True
        if not improved:
            h /= 2.0
    return y, best


# full monitoring


def _full_deficit(game, C, y, tol, x0=None):
    x, d = min_max_distance(game, [y], C, tol=tol, x0=x0)
    return x, d


def check_convex_full(game: GameSpec, C: ConvexTarget, tol: float = DEFAULT_TOL,
                      mesh: float = DEFAULT_MESH) -> Certificate:
    """Blackwell's criterion: C is approachable iff P^2(y) meets C for all y.

    For each facet (a, b) the scalar game <a, rho(i, j)> is solved with the
    row player minimizing; a facet value above b yields a stationary
    excluding column.  When the facets describe the whole geometry (d = 1 or
    a single facet) that test is exact.  Otherwise the facet test is only
    necessary, and the deficit max_y min_x d_C(rho(x, y)) is computed on a
    y-grid refined by pattern search.
    """
    d = game.payoff_dim
    n_j = game.num_actions_p2
    if C.dim != d:
        raise ValueError(f"target lives in R^{C.dim}, payoffs in R^{d}")
    facet_fail = []
    exact = False
    if C.polyhedral:
        facets = C.facets()
        exact = d == 1 or len(facets) <= 1
        for a, b in facets:
            res = min_row_value(game.payoffs @ a)
            gap = (res.value - b) / np.linalg.norm(a)
            if gap > tol:
                facet_fail.append((gap, res.optimal_col))
        if exact:
            if not facet_fail:
                return Certificate(APPROACHABLE, 0.0, _full_witness(game, C, tol, mesh), None,
                                   None, method="facets")
            gap, y0 = max(facet_fail, key=lambda t: t[0])
            return Certificate(NOT_APPROACHABLE, float(gap), None, flag_of(game, y0), None,
                               excluding_action=y0, method="facets")

    steps = _steps(mesh)
    Y = simplex_grid(n_j, steps)
    x_prev = None
    upper = np.empty(len(Y))
    xs = []
    for k, y in enumerate(Y):
        x, upper[k] = min_max_distance(game, [y], C, tol=tol, x0=x_prev, quick=True)
        xs.append(x)
        x_prev = x
    starts = [Y[k] for k in np.argsort(-upper, kind="stable")[:3] if upper[k] > tol]
    starts += [y0 for _, y0 in facet_fail]
    best_y, best_d = None, 0.0
    for y in starts:
        _, dy = _full_deficit(game, C, y, tol)
        if dy > tol:
            y_ref, d_ref = refine_max(lambda v: _full_deficit(game, C, v, tol)[1], y, 1.0 / steps)
            if d_ref > best_d:
                best_y, best_d = y_ref, d_ref
    if best_y is None:
        witness = [(flag_of(game, y), x) for y, x in zip(Y, xs)]
        return Certificate(APPROACHABLE, 0.0, witness, None, 1.0 / steps, meshes=[1.0 / steps],
                           method="grid")
    return Certificate(NOT_APPROACHABLE, float(best_d), None, flag_of(game, best_y), 1.0 / steps,
                       excluding_action=best_y, meshes=[1.0 / steps], method="grid")


def _full_witness(game, C, tol, mesh):
    """Witness table on a coarse y-grid for certificates from the facet test."""
    steps = min(_steps(mesh), 16)
    out, x_prev = [], None
    for y in simplex_grid(game.num_actions_p2, steps):
        x, _ = min_max_distance(game, [y], C, tol=tol, x0=x_prev)
        out.append((flag_of(game, y), x))
        x_prev = x
    return out


# partial monitoring


class FlagOracle:
    """Caches inverse-flag vertices and min-max problems per flag."""

    def __init__(self, game: GameSpec, C: ConvexTarget):
        self.game, self.C = game, C
        self._verts: dict[bytes, np.ndarray] = {}

    def vertices(self, mu) -> np.ndarray:
        key = np.round(np.asarray(mu), 12).tobytes()
        if key not in self._verts:
            verts = enumerate_vertices(inverse_flag_polytope(self.game, mu), check_bounded=False)
            self._verts[key] = np.array(verts).reshape(-1, self.game.num_actions_p2)
        return self._verts[key]

    def problem(self, mu) -> MinMaxProblem:
        return MinMaxProblem(self.game, self.vertices(mu), self.C)

    def deficit(self, mu, tol=DEFAULT_TOL, x0=None, quick=False):
        """(x, min_x max_{v in s^{-1}(mu)} d_C(rho(x, v)))."""
        verts = self.vertices(mu)
        if verts.shape[0] == 0:
            raise ValueError("flag outside the range of the signal map")
        return min_max_distance(self.game, verts, self.C, tol=tol, x0=x0, quick=quick,
                                problem=self.problem(mu))

    def deficit_of_y(self, y, tol=DEFAULT_TOL):
        return self.deficit(flag_of(self.game, y), tol)[1]


def grid_flags(game: GameSpec, steps: int):
    """Deduplicated flags of a Delta(J) grid, sorted lexicographically.

    Returns (flags, representative y for each flag).
    """
    Y = simplex_grid(game.num_actions_p2, steps)
    F = np.einsum("nj,ijs->nis", Y, game.signals)
    keys = np.round(F.reshape(len(Y), -1), 9)
    _, first = np.unique(keys, axis=0, return_index=True)
    # np.unique sorts the keys lexicographically
    return F[first], Y[first]


def _partial_pass(game, C, steps, tol, oracle):
    flags, reps = grid_flags(game, steps)
    n = len(flags)
    upper = np.empty(n)
    xs = [None] * n
    x_prev = None
    for k, mu in enumerate(flags):
        xs[k], upper[k] = oracle.deficit(mu, tol, x0=x_prev, quick=True)
        x_prev = xs[k]
    exact = np.full(n, np.nan)
    best_lb, worst = 0.0, None
    for k in np.argsort(-upper, kind="stable"):
        if upper[k] <= tol or upper[k] <= best_lb:
            break
        xs[k], exact[k] = oracle.deficit(flags[k], tol, x0=xs[k])
        if exact[k] > tol and (exact[k] > best_lb + 1e-12 or (abs(exact[k] - best_lb) <= 1e-12 and k < worst)):
            best_lb, worst = exact[k], k
    return flags, reps, xs, best_lb, worst


def check_convex_partial(game: GameSpec, C: ConvexTarget, mesh: float = DEFAULT_MESH,
                         tol: float = DEFAULT_TOL, refine: bool = True,
                         max_halvings: int = 2) -> Certificate:
    """Decide whether every realizable flag admits x with P(x, mu) inside C.

    Flags come from a simplex grid over Delta(J) of step ``mesh``; each is
    tested by minimizing max_{v} d_C(rho(x, v)) over the vertices v of
    s^{-1}(mu).  With ``refine`` the mesh is halved until two consecutive
    meshes give the same verdict (at most ``max_halvings`` times).  A failing
    verdict is sharpened by a pattern search over the flag's preimage.
    """
    if C.dim != game.payoff_dim:
        raise ValueError(f"target lives in R^{C.dim}, payoffs in R^{game.payoff_dim}")
    steps = _steps(mesh)
    oracle = FlagOracle(game, C)
    meshes, verdicts = [], []
    while True:
        flags, reps, xs, deficit, worst = _partial_pass(game, C, steps, tol, oracle)
        meshes.append(1.0 / steps)
        verdicts.append(worst is None)
        if not refine or len(verdicts) > max_halvings or (
                len(verdicts) >= 2 and verdicts[-1] == verdicts[-2]):
            break
        steps *= 2
    stable = len(verdicts) >= 2 and verdicts[-1] == verdicts[-2]
    if worst is None:
        return Certificate(APPROACHABLE, 0.0, list(zip(flags, xs)), None, meshes[-1],
                           meshes=meshes, stable=stable or not refine, method="flag-grid")
    y_best, d_best = refine_max(lambda y: oracle.deficit_of_y(y, tol), reps[worst], 1.0 / steps)
    if d_best > deficit + 1e-9:
        flag = flag_of(game, y_best)
    else:
        flag, d_best, y_best = flags[worst], deficit, reps[worst]
    return Certificate(NOT_APPROACHABLE, float(d_best), None, flag, meshes[-1],
                       meshes=meshes, stable=stable or not refine, method="flag-grid")


@dataclass
class HalfspaceVerdict:
    kind: str  # "approachable_by_1" or "excludable_by_2"
    witness_map: list | None = None
    delta: float = 0.0
    certificate: Certificate | None = None


def halfspace_dichotomy(game: GameSpec, H: ConvexTarget, mesh: float = DEFAULT_MESH,
                        tol: float = DEFAULT_TOL) -> HalfspaceVerdict:
    """A half-space is approachable by Player 1 or excludable by Player 2."""
    if not isinstance(H, HalfSpace):
        raise TypeError("halfspace_dichotomy needs a HalfSpace target")
    cert = check_convex_partial(game, H, mesh=mesh, tol=tol)
    if cert.approachable:
        return HalfspaceVerdict("approachable_by_1", cert.witness_map, 0.0, cert)
    return HalfspaceVerdict("excludable_by_2", None, cert.deficit, cert)


def bset_response(game: GameSpec, C: ConvexTarget, z):
    """Mixed action x(z) whose payoffs stay behind the hyperplane through p = proj_C(z).

    Solves min_x max_j <z - p, rho(x, j) - p>.  Inside C the uniform action is
    returned.  Returns (x, value); value <= 0 certifies the separation.
    """
    z = np.asarray(z, dtype=float)
    p = C.project(z)
    w = z - p
    if np.sqrt(w @ w) <= 1e-12:
        return uniform(game.num_actions_p1), 0.0
    M = (game.payoffs - p) @ w
    res = min_row_value(M)
    return res.optimal_row, res.value


def batch_bset_response(game: GameSpec, C: ConvexTarget, Z):
    """Vectorized :func:`bset_response` for a batch of points ``Z`` of shape (R, d)."""
    from .solvers import batch_min_row

    Z = np.asarray(Z, dtype=float)
    P = C.project(Z)
    W = Z - P
    norm = np.sqrt((W ** 2).sum(axis=1))
    inside = norm <= 1e-12
    n_i = game.num_actions_p1
    X = np.full((Z.shape[0], n_i), 1.0 / n_i)
    if (~inside).any():
        out = ~inside
        # the optimal row does not depend on the scale of z - p; unit scale keeps solver tolerances meaningful
        W[out] /= norm[out, None]
        M = np.einsum("ijd,rd->rij", game.payoffs, W[out]) - np.einsum("rd,rd->r", P[out], W[out])[:, None, None]
        if n_i <= 4 and game.num_actions_p2 <= 6:
            X[out], _ = batch_min_row(M)
        else:
            X[out] = np.stack([min_row_value(m).optimal_row for m in M])
    return X
