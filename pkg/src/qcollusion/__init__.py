"""Q-learning collusion simulator and stochastic-stability verifier."""

from .games import (ActionGrid, AssumptionReport, GameSpec, benchmark_profits, check_assumptions,
                    make_bertrand, make_mixed_auction, make_prisoners_dilemma)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "ActionGrid", "AssumptionReport", "GameSpec", "benchmark_profits", "check_assumptions",
    "make_bertrand", "make_mixed_auction", "make_prisoners_dilemma", "BACKEND",
]
