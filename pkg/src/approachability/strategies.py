"""Strategies for both players, batched over independent runs.

A strategy instance drives R runs at once.  ``reset(seeds)`` starts one run
per seed, ``next_mixed()`` returns the (R, A) mixed actions of the coming
stage and ``observe`` feeds back what the owner sees:

* Player 1: ``observe(actions, signals, payoffs)``.  Only payoff-observing
  strategies (Blackwell's) read ``payoffs``.
* Player 2: ``observe(p1_actions, p2_actions, signals)``; the opponent sees
  everything.

Strategies that need extra randomness draw it from per-run streams keyed by
the seed, so a run behaves the same whatever batch it belongs to.
Horizon-indexed adversaries implement ``prepare(game, sigma, horizon)``,
which the simulator calls before each batch.
"""

from __future__ import annotations

import math

import numpy as np

from .conditions import batch_bset_response, check_convex_partial, grid_flags
from .game import GameSpec, flag_of, flag_range, inverse_flag_polytope, uniform
from .geometry import ConvexTarget
from .rng import P1_TAG, P2_TAG, UniformStreams, sample_rows
from .running import KahanSum
from .solvers import MinMaxProblem, enumerate_vertices, min_max_distance, simplex_grid


class Strategy:
    """Common bookkeeping: seeds, stage counter, per-run streams."""

    player = 1
    n_actions: int
    n_types = 0
    current_types = None
    name = "strategy"

    def reset(self, seeds, stream=()) -> None:
        self.seeds = [int(s) for s in seeds]
        self.n_runs = len(self.seeds)
        self.t = 0
        tag = P1_TAG if self.player == 1 else P2_TAG
        self.streams = UniformStreams(self.seeds, tag, *stream)

    def next_mixed(self) -> np.ndarray:
        raise NotImplementedError

    def observe(self, *args) -> None:
        self.t += 1

    def _broadcast(self, x) -> np.ndarray:
        return np.broadcast_to(x, (self.n_runs, x.shape[-1]))


# Player 1


class BlackwellStrategy(Strategy):
    """Play the B-set response to the current average payoff; uniform at stage 1.

    With ``assumed_opponent`` the strategy does not read realized payoffs and
    averages rho(i, y_assumed) instead (a naive player without payoff
    feedback).
    """

    name = "blackwell"

    def __init__(self, game: GameSpec, C: ConvexTarget, assumed_opponent=None):
        self.game, self.C = game, C
        self.n_actions = game.num_actions_p1
        self.assumed = None
        if assumed_opponent is not None:
            self.assumed = np.einsum("j,ijd->id", np.asarray(assumed_opponent, float), game.payoffs)
            self.name = "blackwell-naive"

    def reset(self, seeds, stream=()):
        super().reset(seeds, stream)
        self.sum = KahanSum((self.n_runs, self.game.payoff_dim))

    def next_mixed(self):
        if self.t == 0:
            return self._broadcast(uniform(self.n_actions)).copy()
        return batch_bset_response(self.game, self.C, self.sum.mean())

    def observe(self, actions, signals, payoffs):
        if self.assumed is not None:
            payoffs = self.assumed[actions]
        self.sum.add(payoffs)
        self.t += 1


class FixedMixed(Strategy):
    """Player 1 playing the same mixed action at every stage."""

    def __init__(self, x, name: str | None = None):
        self.x = np.asarray(x, dtype=float)
        self.n_actions = self.x.shape[0]
        self.name = name or "fixed[" + ",".join(f"{v:g}" for v in self.x) + "]"

    def next_mixed(self):
        return self._broadcast(self.x)


def exploration_rate(n: int) -> float:
    return min(1.0, n ** (-1.0 / 3.0))


def no_exploration(n: int) -> float:
    return 0.0


def signals_action_free(game: GameSpec) -> bool:
    """True when every action draws its signal from the same law, so play reveals the flag for free."""
    verts = np.stack(flag_range(game))
    return bool(np.allclose(verts, verts[:, :1]))


def stationary_distribution(Rpos, pi0, tol: float = 1e-10, max_squarings: int = 40):
    """Invariant law of the regret-matching chain, one per run.

    Row l moves to l' with probability R+(l, l') / Z where Z is the largest
    row sum, and stays otherwise.  Runs without positive regret get the
    uniform law.  When the invariant law is unique it is found by a direct
    linear solve; otherwise (reducible chains) the warm start ``pi0`` is
    pushed through Q^(2^k) until it stops moving by more than ``tol``.
    """
    R, L, _ = Rpos.shape
    rows = Rpos.sum(axis=2)
    Z = rows.max(axis=1)
    pi = np.full((R, L), 1.0 / L)
    act = Z > 0
    if not act.any():
        return pi
    idx = np.arange(L)
    Q = Rpos[act] / Z[act, None, None]
    Q[:, idx, idx] = 1.0 - rows[act] / Z[act, None]
    # pi (I - Q + 11') = 1' has the invariant law as its only solution when it is unique
    M = np.transpose(np.eye(L) - Q + 1.0, (0, 2, 1))
    ok = np.abs(np.linalg.det(M)) > 1e-10
    p = pi0[act].copy()
    if ok.any():
        M[~ok] = np.eye(L)
        sol = np.linalg.solve(M, np.ones((M.shape[0], L, 1)))[..., 0]
        good = ok & (sol.min(axis=1) >= -1e-9)
        p[good] = sol[good]
        ok = good
    if (~ok).any():
        P = 0.5 * (Q[~ok] + np.eye(L))
        q = p[~ok]
        for _ in range(max_squarings):
            nxt = np.einsum("rl,rlm->rm", q, P)
            if np.abs(nxt - q).max() < tol:
                q = nxt
                break
            q = nxt
            P = P @ P
            P /= P.sum(axis=2, keepdims=True)
        p[~ok] = q
    p = np.clip(p, 0.0, None)
    pi[act] = p / p.sum(axis=1, keepdims=True)
    return pi


def _neighbour_offsets(n: int):
    return [(a, b) for a in range(n) for b in range(n) if a != b]


def type_grid(game: GameSpec, steps: int):
    """Flags of a Delta(J) mesh, deduplicated, with the cell of each type.

    The cell of a type holds its own flag and the flags half a mesh step
    away from any grid point producing it.  Returns (flags, reps, cells).
    """
    flags, reps = grid_flags(game, steps)
    keys = np.round(flags.reshape(len(flags), -1), 9)
    lookup = {k.tobytes(): l for l, k in enumerate(keys)}
    Y = simplex_grid(game.num_actions_p2, steps)
    cells = [[f] for f in flags]
    moves = _neighbour_offsets(game.num_actions_p2)
    for y in Y:
        l = lookup[np.round(flag_of(game, y).reshape(-1), 9).tobytes()]
        for a, b in moves:
            if y[b] <= 1e-12:
                continue
            z = y.copy()
            half = min(0.5 / steps, z[b])
            z[a] += half
            z[b] -= half
            cells[l].append(flag_of(game, z))
    return flags, reps, cells


def cell_witness(game, C, cell, tol=1e-6, x0=None):
    """x minimizing the worst distance over every flag of a cell."""
    verts = []
    for mu in cell:
        v = enumerate_vertices(inverse_flag_polytope(game, mu), check_bounded=False)
        verts.extend(v)
    V = np.unique(np.round(np.array(verts), 12), axis=0)
    return min_max_distance(game, V, C, tol=tol, x0=x0)


class CalibratedStrategy(Strategy):
    """Internally consistent play over a finite set of flag types.

    Each type l carries a flag mu(l) and a mixed action x(l).  The type of
    the stage is drawn from the invariant law of the regret-matching chain
    on the pairwise internal regrets of the flag forecasts under the
    quadratic loss ||mu(l) - mu||^2; the action is drawn from
    (1 - g_n) x(l) + g_n uniform with g_n = min(1, n^(-1/3)).  Games whose
    signal law does not depend on the action skip exploration (g_n = 0).

    Flags are never observed, only estimated from (own action, signal):

    * ``"min-norm"``: the minimum-norm unbiased estimate supported on the
      span of the flag-range vertices;
    * ``"importance"``: one-hot signal of the played row divided by its play
      probability.

    Args:
        type_flags: (L, A, S) forecasts mu(l).
        witnesses: (L, A) mixed actions x(l).
        range_vertices: (V, A, S) vertices of the flag range.
        estimator: ``"min-norm"`` or ``"importance"``.
        guarantee: False when the target failed the checker.
    """

    name = "calibrated"

    def __init__(self, type_flags, witnesses, range_vertices, estimator="min-norm",
                 exploration=exploration_rate, guarantee=True, epsilon=None, deficits=None):
        self.type_flags = np.asarray(type_flags, dtype=float)
        self.witnesses = np.asarray(witnesses, dtype=float)
        L, A, S = self.type_flags.shape
        self.n_types, self.n_actions, self.n_signals = L, A, S
        self.flat = self.type_flags.reshape(L, A * S)
        self.sq = (self.flat ** 2).sum(axis=1)
        self.F = np.asarray(range_vertices, dtype=float).reshape(-1, A * S).T
        if estimator not in ("min-norm", "importance"):
            raise ValueError(f"unknown flag estimator {estimator!r}")
        self.estimator = estimator
        self.exploration = exploration
        self.guarantee = guarantee
        self.epsilon = epsilon
        self.deficits = deficits

    @classmethod
    def from_game(cls, game: GameSpec, C: ConvexTarget, epsilon: float, steps: int | None = None,
                  witness: str = "cell", estimator: str = "min-norm", tol: float = 1e-6,
                  check: bool = True, exploration=None):
        """Build types from a Delta(J) mesh with about 1/epsilon steps."""
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        steps = steps or max(1, math.ceil(1.0 / epsilon))
        guarantee = check_convex_partial(game, C).approachable if check else True
        flags, reps, cells = type_grid(game, steps)
        xs, defs = [], []
        for mu, cell in zip(flags, cells):
            verts = enumerate_vertices(inverse_flag_polytope(game, mu), check_bounded=False)
            x, d = min_max_distance(game, np.array(verts), C, tol=tol)
            if witness == "cell":
                x, d = cell_witness(game, C, cell, tol, x0=x)
            elif witness != "point":
                raise ValueError(f"unknown witness mode {witness!r}")
            xs.append(x)
            defs.append(d)
        if exploration is None:
            exploration = no_exploration if signals_action_free(game) else exploration_rate
        strat = cls(flags, np.array(xs), np.stack(flag_range(game)), estimator=estimator,
                    exploration=exploration, guarantee=guarantee, epsilon=epsilon, deficits=np.array(defs))
        return strat

    def reset(self, seeds, stream=()):
        super().reset(seeds, stream)
        R, L = self.n_runs, self.n_types
        self.regret = np.zeros((R, L, L))
        self.counts = np.zeros((R, L), dtype=np.int64)
        self.pi = np.full((R, L), 1.0 / L)
        self.current_types = np.zeros(R, dtype=np.int64)
        self._x = None

    def next_mixed(self):
        g = self.exploration(self.t + 1)
        self.pi = stationary_distribution(np.maximum(self.regret, 0.0), self.pi)
        self.current_types = sample_rows(self.pi, self.streams.draw(1)[:, 0])
        self._x = (1.0 - g) * self.witnesses[self.current_types] + g / self.n_actions
        return self._x

    def estimate_flags(self, x, actions, signals):
        """Unbiased flag estimates (R, A*S) from one observation per run."""
        R = len(actions)
        A, S = self.n_actions, self.n_signals
        col = actions * S + signals
        if self.estimator == "importance":
            est = np.zeros((R, A * S))
            est[np.arange(R), col] = 1.0 / x[np.arange(R), actions]
            return est
        DF = np.repeat(x, S, axis=1)[:, :, None] * self.F[None]
        P = np.linalg.pinv(DF)
        return P[np.arange(R), :, col] @ self.F.T

    def observe(self, actions, signals, payoffs=None):
        est = self.estimate_flags(self._x, actions, signals)
        loss = self.sq[None, :] - 2.0 * est @ self.flat.T
        self.regret += self.pi[:, :, None] * (loss[:, :, None] - loss[:, None, :])
        self.counts[np.arange(self.n_runs), self.current_types] += 1
        self.t += 1


class DoublingStrategy(Strategy):
    """Run the epsilon_k = 2^-k strategy on block k of length L0 * growth^k.

    Every block starts a freshly built and reset strategy.
    """

    name = "doubling"

    def __init__(self, factory, n_actions: int, L0: int = 64, growth: int = 4, player: int = 1):
        self.factory = factory
        self.n_actions = n_actions
        self.L0, self.growth = L0, growth
        self.player = player
        self._cache: dict[int, Strategy] = {}

    def block_bounds(self, k: int) -> tuple[int, int]:
        """Stages [start, end) of block k (0-based stage counter)."""
        start = sum(self.L0 * self.growth ** m for m in range(k))
        return start, start + self.L0 * self.growth ** k

    def _start_block(self, k):
        if k not in self._cache:
            self._cache[k] = self.factory(2.0 ** -k)
        self.block = k
        self.inner = self._cache[k]
        self.inner.reset(self.seeds, (k,))
        self.block_end = self.block_bounds(k)[1]

    def reset(self, seeds, stream=()):
        super().reset(seeds, stream)
        self._start_block(0)

    @property
    def current_types(self):
        return None

    def next_mixed(self):
        if self.t >= self.block_end:
            self._start_block(self.block + 1)
        return self.inner.next_mixed()

    def observe(self, *args):
        self.inner.observe(*args)
        self.t += 1


def block_lengths(max_p: int) -> list[int]:
    return [p ** (2 * p + 1) for p in range(1, max_p + 1)]


class BlockStrategy(Strategy):
    """Deterministic T/B schedule: block p has p^(2p+1) stages, T on odd p.

    After the last block the last action is repeated.
    """

    name = "block"

    def __init__(self, max_p: int = 4):
        if not 1 <= max_p <= 5:
            raise ValueError("max_p must lie in [1, 5]")
        self.max_p = max_p
        self.n_actions = 2
        self.ends = np.cumsum(block_lengths(max_p))

    def action_at(self, t: int) -> int:
        """Action (0 = T, 1 = B) at 0-based stage t."""
        p = min(int(np.searchsorted(self.ends, t, side="right")) + 1, self.max_p)
        return 0 if p % 2 == 1 else 1

    def next_mixed(self):
        x = np.zeros(2)
        x[self.action_at(self.t)] = 1.0
        return self._broadcast(x).copy()


class WeakApproachStrategy(Strategy):
    """Finite-horizon play for C_k = [0, 1/k] in the counterexample game.

    Phase 1 (``horizon_block`` stages) plays T.  Each later phase r draws a
    guess k_r uniformly from {1, ..., M} at the start of play and plays B
    with probability k_r / M, aiming to cancel the opponent's frequency of
    R over that phase.  The guesses do not look at the opponent.
    """

    name = "weak"

    def __init__(self, k: int = 2, M: int = 4, horizon_block: int = 10_000):
        if k not in (2, 3):
            raise ValueError("k must be 2 or 3")
        if M < 2:
            raise ValueError("M must be at least 2")
        if horizon_block < 1000:
            raise ValueError("horizon_block must be at least 1000")
        self.k, self.M, self.horizon_block = k, M, horizon_block
        self.n_actions = 2

    @property
    def horizon(self) -> int:
        return self.k * self.horizon_block

    def reset(self, seeds, stream=()):
        super().reset(seeds, stream)
        u = self.streams.draw(self.k - 1)
        self.guesses = np.minimum(np.floor(u * self.M).astype(int) + 1, self.M)

    def next_mixed(self):
        phase = min(self.t // self.horizon_block, self.k - 1)
        x = np.zeros((self.n_runs, 2))
        if phase == 0:
            x[:, 0] = 1.0
        else:
            q = self.guesses[:, phase - 1] / self.M
            x[:, 1] = q
            x[:, 0] = 1.0 - q
        return x


# Player 2


class Player2(Strategy):
    player = 2

    def observe(self, p1_actions, p2_actions, signals):
        self.t += 1


class Stationary(Player2):
    """I.i.d. draws from a fixed mixed action."""

    def __init__(self, y, name: str | None = None):
        self.y = np.asarray(y, dtype=float)
        self.n_actions = self.y.shape[0]
        self.name = name or "stationary[" + ",".join(f"{v:g}" for v in self.y) + "]"

    def next_mixed(self):
        return self._broadcast(self.y)


class PureSequence(Player2):
    """Oblivious deterministic play: ``schedule(t)`` gives the column at 0-based stage t."""

    def __init__(self, n_actions: int, schedule, name: str = "sequence"):
        self.n_actions = n_actions
        self.schedule = schedule
        self.name = name

    def next_mixed(self):
        y = np.zeros(self.n_actions)
        y[self.schedule(self.t)] = 1.0
        return self._broadcast(y).copy()


def alternating(n_actions: int) -> PureSequence:
    return PureSequence(n_actions, lambda t: t % n_actions, "alternating")


def switching(n_actions: int, first: int, second: int, at: int) -> PureSequence:
    return PureSequence(n_actions, lambda t: first if t < at else second, f"switch{first}{second}@{at}")


class Stacked(Player2):
    """Split the runs of a batch among several Player 2 strategies.

    Run r uses ``members[r % len(members)]``, so a batch of
    ``len(members) * n`` seeds plays every member n times.
    """

    def __init__(self, members):
        self.members = list(members)
        self.n_actions = self.members[0].n_actions
        self.name = "+".join(m.name for m in self.members)

    def prepare(self, game, sigma, horizon):
        for m in self.members:
            if hasattr(m, "prepare"):
                m.prepare(game, sigma, horizon)

    def reset(self, seeds, stream=()):
        super().reset(seeds, stream)
        k = len(self.members)
        self.index = np.arange(self.n_runs) % k
        for g, m in enumerate(self.members):
            m.reset([s for s, i in zip(self.seeds, self.index) if i == g], stream)

    def next_mixed(self):
        out = np.empty((self.n_runs, self.n_actions))
        for g, m in enumerate(self.members):
            sel = self.index == g
            if sel.any():
                out[sel] = m.next_mixed()
        return out

    def observe(self, p1_actions, p2_actions, signals):
        for g, m in enumerate(self.members):
            sel = self.index == g
            if sel.any():
                m.observe(p1_actions[sel], p2_actions[sel], signals[sel])
        self.t += 1


class _Probed(Player2):
    """Horizon-indexed adversary that estimates E[average own action] of Player 1.

    Against a strategy whose law does not depend on the opponent (e.g. the
    counterexample game, where Player 1 sees nothing), the probe against a
    fixed column gives the exact expected frequency up to Monte-Carlo error.
    """

    probe_runs = 200

    def probe(self, game, sigma, horizon, probe_y=None):
        from .simulator import probe_action_frequency

        y0 = uniform(game.num_actions_p2) if probe_y is None else probe_y
        self.x_bar = probe_action_frequency(game, sigma, Stationary(y0), horizon, self.probe_runs)
        return self.x_bar

    def next_mixed(self):
        if not hasattr(self, "y"):
            raise RuntimeError(f"{self.name} must be prepared for a horizon before play")
        return self._broadcast(self.y)


class ThresholdExcluder(_Probed):
    """Counterexample adversary: always L if the expected frequency of T is below the threshold, else always R."""

    name = "threshold"

    def __init__(self, threshold: float = 0.75, probe_runs: int = 200):
        self.threshold = threshold
        self.probe_runs = probe_runs
        self.n_actions = 2

    def choose(self, x_bar_T: float) -> np.ndarray:
        return np.array([1.0, 0.0]) if x_bar_T < self.threshold else np.array([0.0, 1.0])

    def prepare(self, game, sigma, horizon):
        x_bar = self.probe(game, sigma, horizon)
        self.y = self.choose(float(x_bar[0]))


class BestResponseExcluder(_Probed):
    """Play the vertex of s^-1(mu0) that is worst for the expected average action.

    mu0 is the checker's failing flag.  Every vertex induces the same flag,
    so Player 1's action law is the same whatever vertex is played.
    """

    name = "best-response"

    def __init__(self, game: GameSpec, C: ConvexTarget, probe_runs: int = 200, mesh: float = 1 / 64):
        cert = check_convex_partial(game, C, mesh=mesh)
        if cert.approachable:
            raise ValueError("target is approachable; nothing to exclude")
        self.C = C
        self.cert = cert
        self.delta = cert.deficit
        self.probe_runs = probe_runs
        self.n_actions = game.num_actions_p2
        self.verts = np.array(enumerate_vertices(inverse_flag_polytope(game, cert.failing_flag),
                                                 check_bounded=False))

    def choose(self, game, x_bar) -> np.ndarray:
        prob = MinMaxProblem(game, self.verts, self.C)
        d = prob.values(np.asarray(x_bar, float))
        return self.verts[int(np.argmax(d >= d.max() - 1e-12))]

    def prepare(self, game, sigma, horizon):
        x_bar = self.probe(game, sigma, horizon, probe_y=self.verts[0])
        self.y = self.choose(game, x_bar)


class ProbedBestResponse(_Probed):
    """Pure column maximizing d_C(rho(x_bar, j)) for the probed average action."""

    name = "probed-br"

    def __init__(self, game: GameSpec, C: ConvexTarget, probe_runs: int = 200):
        self.C = C
        self.probe_runs = probe_runs
        self.n_actions = game.num_actions_p2

    def prepare(self, game, sigma, horizon):
        x_bar = self.probe(game, sigma, horizon)
        d = self.C.distance(np.einsum("i,ijd->jd", x_bar, game.payoffs))
        self.y = np.eye(self.n_actions)[int(np.argmax(d >= d.max() - 1e-12))]
