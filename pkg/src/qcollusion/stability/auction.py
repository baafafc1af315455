"""Valid unilateral perturbations in the omega-mixed first/second-price auction.

From a symmetric bid b, raising to b' > b wins and pays
omega * b' + (1 - omega) * b, which beats the tie payoff (v - b) / 2 exactly
when b' <= (v + (2 omega - 1) b) / (2 omega).  Below the threshold
omega* = (K + 1)(v - b) / (2 [K v - (K + 1) b]) that bound is at least
K v / (K + 1), which already exceeds every grid bid.
"""

from __future__ import annotations

from fractions import Fraction

from ..games import make_mixed_auction
from .grid import exact


def omega_threshold(K: int, v, b) -> Fraction:
    v, b = exact(v), exact(b)
    return (K + 1) * (v - b) / (2 * (K * v - (K + 1) * b))


def valid_interval(K: int, v, omega, b) -> tuple[Fraction, Fraction]:
    """Half-open interval (b, upper] of valid perturbation bids."""
    v, w, b = exact(v), exact(omega), exact(b)
    if w == 0 or w <= omega_threshold(K, v, b):
        return b, K * v / (K + 1)
    return b, (v + (2 * w - 1) * b) / (2 * w)


def valid_perturbations_auction(K: int, v, omega, b) -> list[float]:
    """Grid bids b' with b < b' within the valid interval."""
    v_, w, b_ = exact(v), exact(omega), exact(b)
    if not 0 <= w <= 1:
        raise ValueError("omega must lie in [0, 1]")
    bids = [v_ * k / K for k in range(K)]
    if b_ not in bids:
        raise ValueError(f"{b} is not a grid bid")
    if b_ >= bids[-1]:
        raise ValueError("b must lie below the equilibrium bid")
    lo, hi = valid_interval(K, v_, w, b_)
    return [float(x) for x in bids if lo < x <= hi]


def valid_perturbations_scan(K: int, v, omega, b) -> list[float]:
    """Table scan: higher bids a' with u(a', b) >= u(b, b)."""
    game = make_mixed_auction(K, float(v), float(omega))
    j = game.index_of(float(b))
    return [float(game.values[i]) for i in range(j + 1, K)
            if game.payoff[i, j] >= game.payoff[j, j]]
