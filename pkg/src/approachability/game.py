"""Finite repeated games with vector payoffs and random signals.

Mixed actions and flags are plain numpy arrays: a mixed action is a
probability vector over the owner's actions, a flag is an ``(I, S)`` array
whose row ``i`` is the law of the signal received after playing ``i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

PROB_TOL = 1e-12
FLAG_TOL = 1e-9
DEDUP_TOL = 1e-10


class GameFormatError(ValueError):
    """Malformed game or target description."""


def check_mixed(probs, n: int | None = None, name: str = "mixed action") -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"{name} has {p.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(p)) or p.min() < -PROB_TOL or abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
        raise ValueError(f"{name} is not a probability vector: {p}")
    return p


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def pure(k: int, n: int) -> np.ndarray:
    x = np.zeros(n)
    x[k] = 1.0
    return x


@dataclass(frozen=True)
class HPolytope:
    """{x : A_eq x = b_eq, A_ub x <= b_ub} in R^dim."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        dims = {a.shape[1] for a in (self.A_eq, self.A_ub) if a.size or a.ndim == 2}
        if len(dims) != 1:
            raise ValueError("constraint matrices disagree on the ambient dimension")
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def from_arrays(cls, dim, A_eq=None, b_eq=None, A_ub=None, b_ub=None) -> HPolytope:
        def mat(a):
            return np.zeros((0, dim)) if a is None else np.atleast_2d(np.asarray(a, float)).reshape(-1, dim)

        def vec(b, rows):
            return np.zeros(rows) if b is None else np.asarray(b, float).reshape(rows)

        A_eq, A_ub = mat(A_eq), mat(A_ub)
        return cls(A_eq, vec(b_eq, A_eq.shape[0]), A_ub, vec(b_ub, A_ub.shape[0]))

    @classmethod
    def simplex(cls, n: int) -> HPolytope:
        return cls.from_arrays(n, np.ones((1, n)), [1.0], -np.eye(n), np.zeros(n))

    def contains(self, x, tol: float = FLAG_TOL) -> bool:
        x = np.asarray(x, float)
        ok_eq = not self.A_eq.size or np.abs(self.A_eq @ x - self.b_eq).max() <= tol
        ok_ub = not self.A_ub.size or (self.A_ub @ x - self.b_ub).max() <= tol
        return bool(ok_eq and ok_ub)


class GameSpec:
    """Two-player finite game with vector payoffs and Player 1 signals.

    Args:
        payoffs: array ``(I, J, d)`` of vector payoffs (a ``(I, J)`` array is
            read as ``d = 1``).
        signals: array ``(I, J, S)``; row ``[i, j]`` is the law of Player 1's
            signal.  ``None`` means full monitoring (``S = J``, signal ``j``).
        name: optional identifier used in reports and file names.
    """

    def __init__(self, payoffs, signals=None, name: str = "game"):
        rho = np.asarray(payoffs, dtype=float)
        if rho.ndim == 2:
            rho = rho[:, :, None]
        if rho.ndim != 3 or min(rho.shape) < 1:
            raise GameFormatError(f"payoffs must be an (I, J, d) array, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise GameFormatError("payoffs must be finite")
        n_i, n_j, _ = rho.shape
        if signals is None:
            sig = np.broadcast_to(np.eye(n_j), (n_i, n_j, n_j)).copy()
        else:
            sig = np.asarray(signals, dtype=float)
            if sig.ndim != 3 or sig.shape[:2] != (n_i, n_j) or sig.shape[2] < 1:
                raise GameFormatError(f"signals must be an ({n_i}, {n_j}, S) array, got shape {sig.shape}")
            bad = (sig.min(axis=2) < -PROB_TOL) | (np.abs(sig.sum(axis=2) - 1.0) > PROB_TOL * sig.shape[2])
            if bad.any():
                i, j = map(int, np.argwhere(bad)[0])
                raise GameFormatError(f"signals[{i}][{j}] is not a probability vector: {sig[i, j].tolist()}")
            sig = np.clip(sig, 0.0, None)
        rho.setflags(write=False)
        sig.setflags(write=False)
        self.payoffs = rho
        self.signals = sig
        self.name = name

    @classmethod
    def full_monitoring(cls, payoffs, name: str = "game") -> GameSpec:
        return cls(payoffs, None, name)

    num_actions_p1 = property(lambda self: self.payoffs.shape[0])
    num_actions_p2 = property(lambda self: self.payoffs.shape[1])
    payoff_dim = property(lambda self: self.payoffs.shape[2])
    num_signals = property(lambda self: self.signals.shape[2])

    @cached_property
    def bound(self) -> float:
        """B = max_{i,j} ||rho(i, j)||^2."""
        return float((self.payoffs ** 2).sum(axis=2).max())

    @cached_property
    def signal_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.signals, axis=2)
        cdf[:, :, -1] = 1.0
        return cdf

    @cached_property
    def is_full_monitoring(self) -> bool:
        n_j = self.num_actions_p2
        return self.num_signals == n_j and np.array_equal(
            self.signals, np.broadcast_to(np.eye(n_j), self.signals.shape))

    def with_signals(self, signals, name: str | None = None) -> GameSpec:
        return GameSpec(self.payoffs, signals, name or self.name)

    def __repr__(self):
        i, j, d = self.payoffs.shape
        return f"GameSpec({self.name!r}, I={i}, J={j}, S={self.num_signals}, d={d})"

    # serialization

    def to_dict(self) -> dict:
        return {"name": self.name, "payoffs": self.payoffs.tolist(), "signals": self.signals.tolist()}

    @classmethod
    def from_dict(cls, data: dict, name: str | None = None) -> GameSpec:
        if not isinstance(data, dict):
            raise GameFormatError("game description must be a JSON object")
        if "payoffs" not in data:
            raise GameFormatError("missing field 'payoffs'")
        payoffs = _nested_array(data["payoffs"], "payoffs", depth=3)
        signals = data.get("signals")
        if signals is not None:
            signals = _nested_array(signals, "signals", depth=3)
        return cls(payoffs, signals, name or data.get("name", "game"))

    @classmethod
    def load(cls, path) -> GameSpec:
        path = Path(path)
        return cls.from_dict(load_json(path), name=None if _has_name(path) else path.stem)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def _has_name(path: Path) -> bool:
    try:
        return "name" in json.loads(path.read_text())
    except (OSError, ValueError):
        return False


def load_json(path) -> dict:
    """Read a JSON file, reporting syntax errors with their line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GameFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _nested_array(value, field_name: str, depth: int) -> np.ndarray:
    """Validate a rectangular nested list of numbers, naming the first bad entry."""

    def walk(v, path, level):
        if level == 0:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise GameFormatError(f"{path}: expected a number, got {v!r}")
            return None
        if not isinstance(v, list) or not v:
            raise GameFormatError(f"{path}: expected a non-empty list")
        lens = {len(e) if isinstance(e, list) else -1 for e in v} if level > 1 else set()
        if len(lens) > 1:
            raise GameFormatError(f"{path}: ragged entries (lengths {sorted(lens)})")
        for k, e in enumerate(v):
            walk(e, f"{path}[{k}]", level - 1)

    walk(value, field_name, depth)
    return np.asarray(value, dtype=float)


# bilinear extensions


def expected_payoff(game: GameSpec, x, y) -> np.ndarray:
    """rho(x, y) = sum_{i,j} x_i y_j rho(i, j)."""
    x = check_mixed(x, game.num_actions_p1, "x")
    y = check_mixed(y, game.num_actions_p2, "y")
    return np.einsum("i,j,ijd->d", x, y, game.payoffs)


def flag_of(game: GameSpec, y) -> np.ndarray:
    """The flag s(y): row i is sum_j y_j s(i, j)."""
    y = check_mixed(y, game.num_actions_p2, "y")
    return np.einsum("j,ijs->is", y, game.signals)


def check_flag(game: GameSpec, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    shape = (game.num_actions_p1, game.num_signals)
    if mu.shape != shape:
        raise ValueError(f"flag must have shape {shape}, got {mu.shape}")
    for i, row in enumerate(mu):
        check_mixed(row, name=f"flag row {i}")
    return mu


def dedupe_points(points, tol: float) -> list:
    """Keep the first of every group of points within ``tol`` (inf-norm)."""
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.abs(p - q).max() > tol for q in kept):
            kept.append(p)
    return kept


def flag_range(game: GameSpec) -> list[np.ndarray]:
    """Vertices {s(e_j)} of the flag range, duplicates removed."""
    return dedupe_points([game.signals[:, j, :].copy() for j in range(game.num_actions_p2)], DEDUP_TOL)


def inverse_flag_polytope(game: GameSpec, mu) -> HPolytope:
    """H-representation of s^{-1}(mu) = {y in Delta(J) : s(y) = mu}.

    Empty (as a polytope) when mu is not in the flag range.
    """
    mu = np.asarray(mu, dtype=float)
    n_i, n_j, n_s = game.signals.shape
    # row (i, s) of the flag as a linear form in y
    A = game.signals.transpose(0, 2, 1).reshape(n_i * n_s, n_j)
    A_eq = np.vstack([np.ones((1, n_j)), A])
    b_eq = np.concatenate([[1.0], mu.reshape(-1)])
    return HPolytope.from_arrays(n_j, A_eq, b_eq, -np.eye(n_j), np.zeros(n_j))


def project_flag_to_range(game: GameSpec, mu) -> np.ndarray:
    """Euclidean projection of a flag onto the convex hull of the flag range."""
    from .qp import simplex_least_squares

    mu = np.asarray(mu, dtype=float)
    verts = flag_range(game)
    V = np.stack([v.reshape(-1) for v in verts], axis=1)
    _, proj = simplex_least_squares(V, mu.reshape(-1))
    return proj.reshape(mu.shape)


def sample_signal(game: GameSpec, i: int, j: int, rng: np.random.Generator) -> int:
    """Draw Player 1's signal after the action pair (i, j)."""
    return int(np.searchsorted(game.signal_cdf[i, j], rng.random(), side="right").clip(0, game.num_signals - 1))


def sample_signals(game: GameSpec, i, j, u) -> np.ndarray:
    """Vectorized signal draw from uniforms ``u`` by inverse CDF."""
    cdf = game.signal_cdf[i, j]
    return np.minimum((u[:, None] >= cdf).sum(axis=1), game.num_signals - 1)
