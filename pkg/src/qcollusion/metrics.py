"""Collusion diagnostics over session results and Q-tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agents import QState, second_highest
from .games import GameSpec, benchmark_profits


@dataclass
class AggregateReport:
    mean_price: float | None
    collusion_index: float | None
    prices: list[float | None]
    share_converged: float
    cycle_length_histogram: dict[int, int] = field(default_factory=dict)
    n_sessions: int = 0
    std_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "mean_price": self.mean_price,
            "collusion_index": self.collusion_index,
            "prices": self.prices,
            "share_converged": self.share_converged,
            "cycle_length_histogram": {str(k): v for k, v in sorted(self.cycle_length_histogram.items())},
            "n_sessions": self.n_sessions,
            "std_error": self.std_error,
        }


def session_price(result, game: GameSpec) -> float | None:
    """Window price for constant-epsilon sessions, convergent price otherwise."""
    if result.occupancy is not None:
        return result.window_weighted_price
    if not result.converged:
        return None
    return result.outcome_price(game.values)


def avg_convergent_price(results: Sequence, game: GameSpec) -> float:
    prices = [p for p in (session_price(r, game) for r in results) if p is not None]
    if not prices:
        raise ValueError("no converged sessions")
    return float(np.mean(prices))


def collusion_index(mean_price: float, game: GameSpec) -> float:
    """(r - r_N) / (r_M - r_N) with total profit r equal to the mean price."""
    r_n, r_m = benchmark_profits(game)
    if not r_m > r_n:
        raise ValueError("degenerate benchmark profits")
    return (mean_price - r_n) / (r_m - r_n)


def _row(q) -> np.ndarray:
    if isinstance(q, QState):
        return q.table[0]
    return np.asarray(q, dtype=np.float64).ravel()


def sustainable_price(q, delta: float) -> float:
    return (1.0 - delta) * second_highest(_row(q))


def stationary_price(q_i, q_j, delta: float) -> float:
    return 2.0 * (1.0 - delta) * max(second_highest(_row(q_i)), second_highest(_row(q_j)))


def windowed_weighted_price(occupancy: np.ndarray, values: np.ndarray,
                            symmetric_only: bool = True) -> float:
    """Frequency-weighted price over a K x K occupancy table.

    By default only symmetric profiles (p, p) count; with
    ``symmetric_only=False`` every period counts at its mean price.
    """
    occ = np.asarray(occupancy, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    if symmetric_only:
        w = np.diag(occ)
        if w.sum() <= 0:
            raise ValueError("no symmetric profile in the window")
        return float((w * vals).sum() / w.sum())
    if occ.sum() <= 0:
        raise ValueError("empty window")
    mean = 0.5 * (vals[:, None] + vals[None, :])
    return float((occ * mean).sum() / occ.sum())


def occupancy_from_pairs(pairs: Sequence[tuple[int, int]], K: int) -> np.ndarray:
    occ = np.zeros((K, K), dtype=np.int64)
    for a, b in pairs:
        occ[a, b] += 1
    return occ


def cycle_length_histogram(results: Sequence) -> dict[int, int]:
    return dict(Counter(r.cycle_length for r in results if r.cycle_length is not None))


def aggregate(results: Sequence, game: GameSpec) -> AggregateReport:
    prices = [session_price(r, game) for r in results]
    valid = [p for p in prices if p is not None]
    mean = float(np.mean(valid)) if valid else None
    ci = None
    if mean is not None:
        try:
            ci = collusion_index(mean, game)
        except ValueError:
            ci = None
    se = float(np.std(valid, ddof=1) / np.sqrt(len(valid))) if len(valid) > 1 else None
    n_conv = sum(1 for r in results if r.converged)
    return AggregateReport(
        mean_price=mean,
        collusion_index=ci,
        prices=prices,
        share_converged=n_conv / len(results) if results else 0.0,
        cycle_length_histogram=cycle_length_histogram(results),
        n_sessions=len(results),
        std_error=se,
    )


@dataclass(frozen=True)
class ReboundEvent:
    t: int
    before: tuple[int, int]
    after: tuple[int, int]


def rebound_events(trace_rows: Sequence[tuple]) -> list[ReboundEvent]:
    """Consecutive trace samples where both agents' greedy action jumps up.

    Rows are raw trace records ``(t, a0, a1, greedy0, greedy1, q2nd0, q2nd1)``
    as stored in ``Trace.data``.
    """
    out = []
    for prev, cur in zip(trace_rows, trace_rows[1:]):
        g_prev = (int(prev[3]), int(prev[4]))
        g_cur = (int(cur[3]), int(cur[4]))
        if g_cur[0] > g_prev[0] and g_cur[1] > g_prev[1]:
            out.append(ReboundEvent(int(cur[0]), g_prev, g_cur))
    return out
