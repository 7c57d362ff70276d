"""Blackwell approachability with full and partial monitoring.

Checkers decide whether Player 1 can approach a convex target, strategies
play the repeated game, the simulator measures what they achieve, and
``incomplete_info`` computes Cav(u) for games with one informed player.
"""

from .conditions import (APPROACHABLE, NOT_APPROACHABLE, Certificate, bset_response, check_convex_full,
                         check_convex_partial, halfspace_dichotomy)
from .game import GameFormatError, GameSpec, HPolytope, expected_payoff, flag_of, flag_range, inverse_flag_polytope
from .geometry import Ball, Box, ConvexTarget, HalfSpace, Polytope, load_target
from .incomplete_info import AuxiliaryGame, IIGame, cav_u, u_of_p, u_value
from .simulator import BatchResult, Trace, run, run_batch, sweep

__version__ = "0.1.0"

__all__ = [
    "APPROACHABLE", "NOT_APPROACHABLE", "AuxiliaryGame", "Ball", "BatchResult", "Box", "Certificate",
    "ConvexTarget", "GameFormatError", "GameSpec", "HPolytope", "HalfSpace", "IIGame", "Polytope", "Trace",
    "bset_response", "cav_u", "check_convex_full", "check_convex_partial", "expected_payoff", "flag_of",
    "flag_range", "halfspace_dichotomy", "inverse_flag_polytope", "load_target", "run", "run_batch", "sweep",
    "u_of_p", "u_value",
]
