"""Small named games and targets used by the tests, the CLI and the experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec
from .geometry import Box, ConvexTarget, HalfSpace
from .incomplete_info import IIGame

INF = np.inf

# rows T, B; columns L, R
COUNTEREXAMPLE_PAYOFFS = [[0.0, 1.0], [-1.0, 0.0]]
COUNTEREXAMPLE_TARGET = Box([0.0], [0.5])


def counterexample(signals: str = "none") -> GameSpec:
    """The 2x2 scalar game [[0, 1], [-1, 0]] with no signal or with full monitoring."""
    if signals == "none":
        return GameSpec(COUNTEREXAMPLE_PAYOFFS, np.ones((2, 2, 1)), name="counterexample")
    if signals == "full":
        return GameSpec(COUNTEREXAMPLE_PAYOFFS, None, name="counterexample_full")
    raise ValueError(f"unknown signal structure {signals!r}")


def interval(lo: float, hi: float) -> Box:
    return Box([lo], [hi])


def regret_game(r, name: str) -> GameSpec:
    """Vector payoffs rho(i, j)_k = r(k, j) - r(i, j); the negative orthant is approachable."""
    r = np.asarray(r, dtype=float)
    return GameSpec(r.T[None, :, :] - r[:, :, None], name=name)


def negative_orthant(d: int) -> Box:
    return Box(np.full(d, -INF), np.zeros(d))


@dataclass(frozen=True)
class Instance:
    name: str
    game: GameSpec
    target: ConvexTarget
    approachable: bool


def full_corpus() -> list[Instance]:
    """Full-monitoring games with d <= 3 and polyhedral targets.

    The first entries are approachable (Blackwell's condition holds); the
    rest are not, with deficits known in closed form.
    """
    cex = counterexample("full")
    signed = GameSpec([[1.0, 2.0], [-1.0, -3.0]], name="signed")
    corner = GameSpec([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]], name="corner")
    pennies = regret_game([[1.0, -1.0], [-1.0, 1.0]], "pennies_regret")
    rps = regret_game([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]], "rps_regret")
    split = GameSpec([[[0.0, 1.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]], name="split")
    return [
        Instance("cex_interval", cex, COUNTEREXAMPLE_TARGET, True),
        Instance("cex_halfline", cex, HalfSpace([1.0], 0.0), True),
        Instance("signed_zero", signed, Box([0.0], [0.0]), True),
        Instance("corner_box", corner, Box([0.0, 0.0], [0.5, 0.5]), True),
        Instance("pennies_orthant", pennies, negative_orthant(2), True),
        Instance("rps_orthant", rps, negative_orthant(3), True),
        # not approachable: y = L forces rho <= 0, distance 0.6
        Instance("cex_far", cex, interval(0.6, 0.9), False),
        # both coordinates >= 0.6 cannot hold together
        Instance("corner_high", corner, Box([0.6, 0.6], [1.0, 1.0]), False),
        # every facet is approachable but the box is not: deficit sqrt(2) * 0.2
        Instance("split_box", split, Box([-1.0, -1.0], [0.3, 0.3]), False),
    ]


def blackwell_corpus() -> list[Instance]:
    return [inst for inst in full_corpus() if inst.approachable]


def partial_corpus() -> list[Instance]:
    """Partial-monitoring games on the counterexample payoffs that pass the flag condition."""
    noisy = GameSpec(COUNTEREXAMPLE_PAYOFFS, [[[0.75, 0.25], [0.25, 0.75]]] * 2, name="noisy")
    # T reveals the column, B reveals nothing (signal 2)
    label = GameSpec(COUNTEREXAMPLE_PAYOFFS, [[[1, 0, 0], [0, 1, 0]], [[0, 0, 1], [0, 0, 1]]],
                     name="label_efficient")
    blind = counterexample("none")
    return [
        Instance("noisy_interval", noisy, COUNTEREXAMPLE_TARGET, True),
        Instance("label_interval", label, COUNTEREXAMPLE_TARGET, True),
        Instance("blind_wide", GameSpec(blind.payoffs, blind.signals, name="blind"), interval(-0.3, 0.8), True),
    ]


def aumann_maschler(prior=(0.5, 0.5)) -> IIGame:
    """Two states, Player 2 sees Player 1's action: u(p) = p(1 - p), already concave."""
    return IIGame([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]], None, prior, name="aumann_maschler")


def revealing_pays(prior=(0.5, 0.5)) -> IIGame:
    """Two states where hiding costs: u(p) = -p(1 - p), Cav(u) = 0."""
    return IIGame([[[-1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, -1.0]]], None, prior, name="revealing_pays")


def identical_states_game(K: int = 3, prior=None) -> IIGame:
    A = np.array([[3.0, -1.0], [-2.0, 1.0]])
    return IIGame(np.stack([A] * K), None, prior, name="identical")


GAMES = {
    "counterexample": lambda: counterexample("none"),
    "counterexample_full": lambda: counterexample("full"),
}
