"""Zero-sum repeated games with incomplete information on one side.

The informed Player 1 learns the state k; the uninformed Player 2 only sees
signals drawn from s^k(i, j).  The value of the infinitely repeated game is
Cav(u)(p), where u(p) is the value of the one-shot game in which Player 1
may only use non-revealing strategies (every state sends Player 2 the same
flag).  Player 2 guarantees it by approaching the orthant m + R_-^K in an
auxiliary vector-payoff game, with m a supporting hyperplane of Cav(u) at p.

Flags here are Player 2's: arrays (J, S) whose row j is the signal law
after column j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .conditions import APPROACHABLE, NOT_APPROACHABLE, Certificate
from .game import (GameFormatError, GameSpec, HPolytope, _nested_array, check_mixed, dedupe_points,
                   flag_of, flag_range, inverse_flag_polytope, load_json)
from .geometry import Box
from .solvers import enumerate_vertices, matrix_game_value, simplex_grid

NEG_INF = float("-inf")


class IIGame:
    """K-state zero-sum game; Player 1 (rows, maximizer) knows the state.

    Args:
        payoffs: (K, I, J) scalar payoffs to Player 1.
        signals: (K, I, J, S) laws of Player 2's signal; ``None`` means
            Player 2 observes Player 1's action (S = I).
        prior: probability vector over the K states.
    """

    def __init__(self, payoffs, signals=None, prior=None, name: str = "iigame"):
        rho = np.asarray(payoffs, dtype=float)
        if rho.ndim != 3:
            raise GameFormatError(f"state payoffs must be (K, I, J), got shape {rho.shape}")
        K, n_i, n_j = rho.shape
        if signals is None:
            signals = np.broadcast_to(np.eye(n_i)[None, :, None, :], (K, n_i, n_j, n_i))
        sig = np.asarray(signals, dtype=float)
        if sig.ndim != 4 or sig.shape[:3] != (K, n_i, n_j):
            raise GameFormatError(f"state signals must be ({K}, {n_i}, {n_j}, S), got shape {sig.shape}")
        prior = np.full(K, 1.0 / K) if prior is None else prior
        try:
            self.prior = check_mixed(prior, K, "prior")
        except ValueError as exc:
            raise GameFormatError(str(exc)) from exc
        self.payoffs = rho
        self.signals = sig
        self.name = name
        self.states = [GameSpec(rho[k].T, sig[k].transpose(1, 0, 2), name=f"{name}[{k}]") for k in range(K)]

    K = property(lambda self: self.payoffs.shape[0])
    num_actions_p1 = property(lambda self: self.payoffs.shape[1])
    num_actions_p2 = property(lambda self: self.payoffs.shape[2])
    num_signals = property(lambda self: self.signals.shape[3])

    @property
    def penalty(self) -> float:
        """A = max_k ||rho^k||_inf."""
        return float(np.abs(self.payoffs).max())

    def state_flag(self, k: int, x) -> np.ndarray:
        """Flag sent to Player 2 when Player 1 plays x in state k."""
        return flag_of(self.states[k], x)

    def with_prior(self, prior) -> IIGame:
        return IIGame(self.payoffs, self.signals, prior, self.name)

    def to_dict(self) -> dict:
        return {"name": self.name, "prior": self.prior.tolist(),
                "states": [{"payoffs": self.payoffs[k].tolist(), "signals": self.signals[k].tolist()}
                           for k in range(self.K)]}

    @classmethod
    def from_dict(cls, data: dict) -> IIGame:
        if not isinstance(data, dict) or "states" not in data:
            raise GameFormatError("incomplete-information game needs a 'states' array")
        states = data["states"]
        if not isinstance(states, list) or not states:
            raise GameFormatError("'states' must be a non-empty list")
        pay, sig = [], []
        for k, st in enumerate(states):
            if not isinstance(st, dict) or "payoffs" not in st:
                raise GameFormatError(f"states[{k}] is missing field 'payoffs'")
            pay.append(_nested_array(st["payoffs"], f"states[{k}].payoffs", depth=2))
            if "signals" in st:
                sig.append(_nested_array(st["signals"], f"states[{k}].signals", depth=3))
        if sig and len(sig) != len(pay):
            raise GameFormatError("either every state or none must give 'signals'")
        try:
            return cls(np.stack(pay), np.stack(sig) if sig else None, data.get("prior"),
                       data.get("name", "iigame"))
        except ValueError as exc:
            raise GameFormatError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> IIGame:
        return cls.from_dict(load_json(path))


def _supported(p, tol=0.0):
    return [k for k in range(len(p)) if p[k] > tol]


def _flag_rows(g: IIGame, k: int):
    """(J*S, I) matrix mapping x^k to the flattened flag."""
    n_i, n_j, n_s = g.num_actions_p1, g.num_actions_p2, g.num_signals
    return g.signals[k].transpose(1, 2, 0).reshape(n_j * n_s, n_i)


def nr_polytope(g: IIGame, p, mu) -> HPolytope:
    """NR(p, mu) in Delta(I)^K: state k sends the flag mu whenever p^k > 0."""
    p = check_mixed(p, g.K, "prior")
    mu = np.asarray(mu, dtype=float).reshape(-1)
    K, n_i = g.K, g.num_actions_p1
    A_eq, b_eq = [], []
    for k in range(K):
        row = np.zeros(K * n_i)
        row[k * n_i:(k + 1) * n_i] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
    for k in _supported(p):
        F = _flag_rows(g, k)
        block = np.zeros((F.shape[0], K * n_i))
        block[:, k * n_i:(k + 1) * n_i] = F
        A_eq.extend(block)
        b_eq.extend(mu)
    return HPolytope.from_arrays(K * n_i, np.array(A_eq), np.array(b_eq), -np.eye(K * n_i), np.zeros(K * n_i))


def _maxmin_lp(g: IIGame, p, A_eq, b_eq):
    """max over x in {A_eq x = b_eq, x >= 0} of min_j sum_k p^k rho^k(x^k, j); -inf if infeasible."""
    K, n_i, n_j = g.payoffs.shape
    n = K * n_i
    # columns j: t - sum_k p^k x^k . rho^k[:, j] <= 0
    coef = (np.asarray(p)[:, None, None] * g.payoffs).reshape(n, n_j)
    A_ub = np.hstack([-coef.T, np.ones((n_j, 1))])
    A_eq = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n_j), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res.status == 2:
        return NEG_INF, None
    if res.status != 0:
        raise RuntimeError(f"non-revealing LP failed: {res.message}")
    return float(-res.fun), res.x[:n].reshape(K, n_i)


def u_value(g: IIGame, p, mu) -> float:
    """u(p, mu): maxmin with Player 1 restricted to NR(p, mu); -inf if empty."""
    P = nr_polytope(g, p, mu)
    return _maxmin_lp(g, p, P.A_eq, P.b_eq)[0]


def nr_union_constraints(g: IIGame, p):
    """Equality system for NR(p): supported states send a common flag.

    The union over mu of NR(p, mu) is the polytope where the flags of all
    supported states coincide, so u(p) is a single LP.
    """
    K, n_i = g.K, g.num_actions_p1
    rows, rhs = [], []
    for k in range(K):
        row = np.zeros(K * n_i)
        row[k * n_i:(k + 1) * n_i] = 1.0
        rows.append(row)
        rhs.append(1.0)
    sup = _supported(p)
    for k in sup[1:]:
        F0, Fk = _flag_rows(g, sup[0]), _flag_rows(g, k)
        block = np.zeros((F0.shape[0], K * n_i))
        block[:, sup[0] * n_i:(sup[0] + 1) * n_i] = F0
        block[:, k * n_i:(k + 1) * n_i] -= Fk
        rows.extend(block)
        rhs.extend(np.zeros(F0.shape[0]))
    return np.array(rows), np.array(rhs)


def flag_grid(g: IIGame, steps: int, states=None) -> list[np.ndarray]:
    """Images of a Delta(I) mesh through each state's flag map, deduplicated."""
    states = range(g.K) if states is None else states
    X = simplex_grid(g.num_actions_p1, steps)
    flags = [g.state_flag(k, x) for k in states for x in X]
    return dedupe_points(flags, 1e-10)


def u_of_p(g: IIGame, p, mesh: float | None = None) -> float:
    """u(p).  Exact LP by default; with ``mesh`` the max of u(p, mu) over a flag grid."""
    p = check_mixed(p, g.K, "prior")
    if mesh is None:
        return _maxmin_lp(g, p, *nr_union_constraints(g, p))[0]
    steps = max(1, int(round(1.0 / mesh)))
    return max(u_value(g, p, mu) for mu in flag_grid(g, steps, _supported(p)))


@dataclass
class CavResult:
    value: float
    m: np.ndarray | None
    grid: np.ndarray
    u: np.ndarray

    def to_dict(self) -> dict:
        return {"cav_u": self.value, "m": None if self.m is None else self.m.tolist()}


def cav_u(g: IIGame, p=None, mesh: float = 1 / 50, u_mesh: float | None = None) -> CavResult:
    """Cav(u)(p) over a Delta(K) grid, with a supporting vector m.

    Solves min <m, p> subject to <m, q> >= u(q) on the grid (the dual of the
    concavification LP); among optimal m the one with least sum is kept so
    that states outside the support of p get tight coordinates.
    """
    p = g.prior if p is None else check_mixed(p, g.K, "prior")
    steps = max(1, int(round(1.0 / mesh)))
    Q = simplex_grid(g.K, steps)
    U = np.array([u_of_p(g, q, u_mesh) for q in Q])
    fin = np.isfinite(U)
    if not fin.any():
        return CavResult(NEG_INF, None, Q, U)
    A_ub, b_ub = -Q[fin], -U[fin]
    res = linprog(p, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * g.K, method="highs")
    if res.status != 0:
        # p is outside the hull of finite grid points
        return CavResult(NEG_INF, None, Q, U)
    value = float(res.fun)
    res2 = linprog(np.ones(g.K), A_ub=np.vstack([A_ub, p]), b_ub=np.append(b_ub, value + 1e-9),
                   bounds=[(None, None)] * g.K, method="highs")
    m = res2.x if res2.status == 0 else res.x
    return CavResult(value, m, Q, U)


def cav_primal(Q, U, p) -> float:
    """max sum lambda_i u_i subject to sum lambda_i q_i = p, lambda >= 0 (finite u only)."""
    fin = np.isfinite(U)
    res = linprog(-U[fin], A_eq=Q[fin].T, b_eq=p, bounds=[(0, None)] * int(fin.sum()), method="highs")
    return float(-res.fun) if res.status == 0 else NEG_INF


class AuxiliaryGame:
    """Vector-payoff game in which the uninformed Player 2 approaches m + R_-^K.

    Player 2 plays columns j and sees the signal drawn from s^k(i, j) of the
    true state.  Coordinate k of the payoff is rho^k(i^k, j) when the flag
    mu lies in the flag range of state k, and -A otherwise.  The target is
    the orthant clipped to the box [-A - 1, m]; the clip is below every
    reachable payoff so it changes no distance that matters.
    """

    def __init__(self, g: IIGame, m):
        self.g = g
        self.m = np.asarray(m, dtype=float)
        if self.m.shape != (g.K,) or not np.all(np.isfinite(self.m)):
            raise ValueError("m must be a finite vector with one entry per state")
        self.A = g.penalty
        self.target = Box(np.full(g.K, -self.A - 1.0), np.minimum(self.m, self.A + 1.0))
        self._rows: dict[bytes, list] = {}

    def compatible_rows(self, mu) -> list:
        """Per state: matrix whose rows are rho^k(x^k, .) over vertices x^k of the preimage of mu.

        ``None`` for states whose flag range misses mu.
        """
        mu = np.asarray(mu, dtype=float)
        key = np.round(mu, 12).tobytes()
        if key not in self._rows:
            out = []
            for k, G in enumerate(self.g.states):
                verts = enumerate_vertices(inverse_flag_polytope(G, mu), check_bounded=False)
                out.append(np.array(verts) @ self.g.payoffs[k] if verts else None)
            self._rows[key] = out
        return self._rows[key]

    def payoff_set_bounds(self, mu, y) -> np.ndarray:
        """Coordinatewise max of the compatible payoffs P^k(mu, y)."""
        rows = self.compatible_rows(mu)
        return np.array([-self.A if r is None else float((r @ y).max()) for r in rows])

    def deficit(self, mu, y) -> float:
        """Distance from the worst compatible payoff vector to the orthant."""
        excess = np.maximum(self.payoff_set_bounds(mu, y) - self.m, 0.0)
        return float(np.sqrt(excess @ excess))

    def witness(self, flags):
        """y minimizing the largest coordinate excess over all flags of a list (LP).

        Returns (y, excess); excess <= 0 means every compatible payoff lies
        in the orthant for every flag of the list.
        """
        n_j = self.g.num_actions_p2
        A_ub, b_ub = [], []
        for mu in flags:
            for k, r in enumerate(self.compatible_rows(mu)):
                if r is None:
                    continue
                A_ub.append(np.hstack([r, -np.ones((r.shape[0], 1))]))
                b_ub.append(np.full(r.shape[0], self.m[k]))
        if not A_ub:
            return np.full(n_j, 1.0 / n_j), -math.inf
        c = np.zeros(n_j + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub),
                      A_eq=np.append(np.ones(n_j), 0.0)[None], b_eq=[1.0],
                      bounds=[(0, None)] * n_j + [(None, None)], method="highs")
        if res.status != 0:
            raise RuntimeError(f"auxiliary witness LP failed: {res.message}")
        y = np.clip(res.x[:n_j], 0.0, None)
        return y / y.sum(), float(res.fun)

    def check(self, mesh: float = 1 / 32, tol: float = 1e-4) -> Certificate:
        """Approachability of the orthant in the auxiliary game over a flag grid."""
        steps = max(1, int(round(1.0 / mesh)))
        witness, worst = [], (-math.inf, None)
        for mu in flag_grid(self.g, steps):
            y, excess = self.witness([mu])
            witness.append((mu, y))
            d = self.deficit(mu, y)
            if d > worst[0]:
                worst = (d, mu)
        if worst[0] <= tol:
            return Certificate(APPROACHABLE, 0.0, witness, None, 1.0 / steps, meshes=[1.0 / steps],
                               method="auxiliary")
        return Certificate(NOT_APPROACHABLE, worst[0], None, worst[1], 1.0 / steps,
                           meshes=[1.0 / steps], method="auxiliary")

    def range_vertices(self) -> np.ndarray:
        verts = [v for G in self.g.states for v in flag_range(G)]
        return np.stack(dedupe_points(verts, 1e-10))

    def types(self, steps: int):
        """Flag types with witnesses robust over half a mesh step, for calibrated play."""
        X = simplex_grid(self.g.num_actions_p1, steps)
        flags, cells = [], []
        for k in range(self.g.K):
            for x in X:
                mu = self.g.state_flag(k, x)
                l = next((n for n, f in enumerate(flags) if np.abs(f - mu).max() <= 1e-10), None)
                if l is None:
                    flags.append(mu)
                    cells.append([mu])
                    l = len(flags) - 1
                for a in range(len(x)):
                    for b in range(len(x)):
                        if a != b and x[b] > 1e-12:
                            z = x.copy()
                            h = min(0.5 / steps, z[b])
                            z[a] += h
                            z[b] -= h
                            cells[l].append(self.g.state_flag(k, z))
        witnesses = np.array([self.witness(cell)[0] for cell in cells])
        return np.array(flags), witnesses

    def calibrated_strategy(self, steps: int = 20, estimator: str = "min-norm"):
        from .strategies import CalibratedStrategy

        flags, witnesses = self.types(steps)
        return CalibratedStrategy(flags, witnesses, self.range_vertices(), estimator=estimator,
                                  epsilon=1.0 / steps)


def identical_states(matrix, K: int = 2, prior=None, signals=None) -> IIGame:
    A = np.asarray(matrix, dtype=float)
    sig = None if signals is None else np.stack([signals] * K)
    return IIGame(np.stack([A] * K), sig, prior, name="identical")


def matrix_value(A) -> float:
    return matrix_game_value(A).value


def simulate_guarantee(g: IIGame, m, informed_profiles, horizon: int, seeds, steps: int = 20,
                       strategy=None):
    """Average payoff of Player 1 when Player 2 plays calibrated for m + R_-^K.

    ``informed_profiles`` maps a name to a (K, I) array of per-state mixed
    actions of the informed player.  Each seed is played once in every state;
    the prior-weighted average sum_k p^k rho_bar^k is returned per seed.
    """
    from .simulator import run_batch
    from .strategies import Stationary

    aux = AuxiliaryGame(g, m)
    sigma = strategy or aux.calibrated_strategy(steps)
    out = {}
    for name, prof in informed_profiles.items():
        prof = np.asarray(prof, dtype=float)
        per_state = []
        for k in range(g.K):
            res = run_batch(g.states[k], sigma, Stationary(prof[k]), horizon, seeds, track_types=False)
            per_state.append(res.final[:, 0])
        out[name] = np.einsum("k,kr->r", g.prior, np.array(per_state))
    return out


def informed_suite(g: IIGame) -> dict:
    """Stationary informed strategies: non-revealing optimum, per-state pure profiles, uniform."""
    K, n_i = g.K, g.num_actions_p1
    suite = {"uniform": np.full((K, n_i), 1.0 / n_i)}
    _, x_nr = _maxmin_lp(g, g.prior, *nr_union_constraints(g, g.prior))
    if x_nr is not None:
        suite["non-revealing"] = np.clip(x_nr, 0.0, None) / np.clip(x_nr, 0.0, None).sum(axis=1, keepdims=True)
    # each state plays its own one-shot optimal row, ignoring what it reveals
    suite["greedy"] = np.array([matrix_game_value(g.payoffs[k]).optimal_row for k in range(K)])
    for i in range(n_i):
        suite[f"pure{i}"] = np.tile(np.eye(n_i)[i], (K, 1))
    return suite
