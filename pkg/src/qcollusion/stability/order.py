"""Strict partial order on absorbing states and the one-mutation descent check.

Each absorbing state is summarized by both agents' Q-vectors in rank order
(integer grid coordinates, so every comparison is exact) and its common
greedy action.  Of the two agents, the "low" one has the lexicographically
smaller rank-ordered vector; identical vectors make agent 0 low.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

LESS, GREATER, INCOMPARABLE = "less", "greater", "incomparable"


@dataclass
class AbsorbingSummary:
    """Arrays over R absorbing states (ranks are 0-based here)."""

    q1: np.ndarray      # (R, K) agent-0 coords, rank order
    q2: np.ndarray      # (R, K) agent-1 coords, rank order
    action: np.ndarray  # (R,) rank of the common greedy action
    dist: np.ndarray    # (R,) sum of |Q - Q(s^N)| in grid steps

    def __post_init__(self):
        a0_low = np.array([tuple(x) <= tuple(y) for x, y in zip(self.q1.tolist(), self.q2.tolist())],
                          dtype=bool)
        self.low = np.where(a0_low[:, None], self.q1, self.q2)
        self.high = np.where(a0_low[:, None], self.q2, self.q1)


def summarize(space, states: np.ndarray, sN: int) -> AbsorbingSummary:
    order = space.order
    v1, v2 = space.split(np.asarray(states))
    c = space.coords
    q1 = c[v1][:, order]
    q2 = c[v2][:, order]
    pa = space.fixed_point_action[v1]
    rank_of = np.empty(space.K, dtype=np.int64)
    rank_of[order] = np.arange(space.K)
    vN1, vN2 = space.split(sN)
    ref1 = c[vN1][order]
    ref2 = c[vN2][order]
    dist = np.abs(q1 - ref1).sum(axis=1) + np.abs(q2 - ref2).sum(axis=1)
    return AbsorbingSummary(q1=q1, q2=q2, action=rank_of[pa], dist=dist)


def _first_difference(low: np.ndarray, a_min: np.ndarray) -> np.ndarray:
    """(R, R) in {-1, 0, 1}: sign of low[s] - low[s'] at the first rank below
    a_min where they differ (0 when they agree on all of them)."""
    R, K = low.shape
    out = np.zeros((R, R), dtype=np.int8)
    decided = np.zeros((R, R), dtype=bool)
    for k in range(K):
        active = (k < a_min) & ~decided
        diff = np.sign(low[:, None, k] - low[None, :, k]).astype(np.int8)
        hit = active & (diff != 0)
        out[hit] = diff[hit]
        decided |= hit
    return out


def order_matrix(summary: AbsorbingSummary, g: dict[int, int]) -> np.ndarray:
    """(R, R) bool, entry [s, s'] true when s precedes s'.

    ``g`` maps a rank (0-based) to the rank of its perturbation target.
    """
    a = summary.action
    a_min = np.minimum(a[:, None], a[None, :])
    first = _first_difference(summary.low, a_min)
    tie = first == 0
    less = first < 0
    less |= tie & (a[:, None] < a[None, :])
    same = tie & (a[:, None] == a[None, :])
    # same action a1: closer to s^N
    d = summary.dist
    less |= same & (a[:, None] == 0) & (d[:, None] < d[None, :])
    # same action above a1: high agent values the perturbation target more
    high = summary.high
    R = len(a)
    tgt = np.array([g.get(int(x), 0) for x in a])
    val = high[np.arange(R), tgt]
    less |= same & (a[:, None] > 0) & (val[:, None] > val[None, :])
    return less


def order_compare(summary: AbsorbingSummary, i: int, j: int, g: dict[int, int]) -> str:
    """Pairwise version of ``order_matrix`` written as plain branches."""
    ai, aj = int(summary.action[i]), int(summary.action[j])

    def lt(x, y, ax, ay):
        lo_x, lo_y = summary.low[x], summary.low[y]
        for k in range(min(ax, ay)):
            if lo_x[k] != lo_y[k]:
                return lo_x[k] < lo_y[k]
        if ax != ay:
            return ax < ay
        if ax == 0:
            return summary.dist[x] < summary.dist[y]
        t = g[ax]
        return summary.high[x][t] > summary.high[y][t]

    if lt(i, j, ai, aj):
        return LESS
    if lt(j, i, aj, ai):
        return GREATER
    return INCOMPARABLE


def g_candidates(game, cap: int = 256) -> list[dict[int, int]]:
    """Every choice of target rank g(k) < k with u(a_g, a_k) >= u(a_k, a_k)."""
    R = game.payoff_by_rank()
    K = game.K
    options = []
    for k in range(1, K):
        opts = [kp for kp in range(k) if R[kp, k] >= R[k, k]]
        options.append(opts)
    out = []
    for combo in itertools.product(*options):
        out.append({k: kp for k, kp in zip(range(1, K), combo)})
        if len(out) >= cap:
            break
    return out


@dataclass
class OrderCheck:
    g: dict[int, int]
    irreflexive: bool
    transitive: bool
    sN_lowest: bool
    lemma6: bool
    lemma6_failures: int

    def to_dict(self) -> dict:
        return {
            "g": {str(k + 1): v + 1 for k, v in self.g.items()},
            "irreflexive": self.irreflexive,
            "transitive": self.transitive,
            "sN_lowest": self.sN_lowest,
            "lemma6": self.lemma6,
            "lemma6_failures": self.lemma6_failures,
        }


def check_order(M: np.ndarray, sN_index: int) -> tuple[bool, bool, bool]:
    irreflexive = not bool(np.diag(M).any())
    Mi = M.astype(np.int64)
    two = (Mi @ Mi) > 0
    transitive = not bool((two & ~M).any())
    others = np.ones(M.shape[0], dtype=bool)
    others[sN_index] = False
    sN_lowest = bool(M[sN_index, others].all())
    return irreflexive, transitive, sN_lowest


def check_lemma6(C: np.ndarray, M: np.ndarray, sN_index: int) -> np.ndarray:
    """Absorbing states (other than s^N) lacking a one-mutation move to a
    strictly lower absorbing state."""
    ok = ((C == 1) & M.T).any(axis=1)
    ok[sN_index] = True
    return np.flatnonzero(~ok)
