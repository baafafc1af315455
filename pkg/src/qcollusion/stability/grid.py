"""Discretized state space: both agents' Q-vectors on an eta-spaced grid.

Grid values are handled as integer coordinates ``k`` with value
``q_lower + k * eta``.  Single-step updates are computed exactly with
fractions and then snapped back onto the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from ..games import GameSpec


class BudgetExceeded(ValueError):
    """The enumerated state space would exceed the configured budget."""


class GridAlignmentError(ValueError):
    """A value that must lie on the grid does not."""


def exact(x) -> Fraction:
    """Exact rational for a float that came from a short decimal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True)
class GridSpec:
    eta: Fraction
    q_lower: Fraction
    q_upper: Fraction

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.q_upper < self.q_lower:
            raise ValueError("q_upper must be >= q_lower")
        if not self.on_grid(self.q_upper):
            raise GridAlignmentError(f"q_upper {self.q_upper} is not on the grid")

    @property
    def points_per_axis(self) -> int:
        return int((self.q_upper - self.q_lower) / self.eta) + 1

    def on_grid(self, x: Fraction) -> bool:
        return ((x - self.q_lower) / self.eta).denominator == 1

    def coord(self, x: Fraction) -> int:
        if not self.on_grid(x):
            raise GridAlignmentError(f"{x} is not on the grid")
        k = int((x - self.q_lower) / self.eta)
        if not 0 <= k < self.points_per_axis:
            raise GridAlignmentError(f"{x} lies outside [{self.q_lower}, {self.q_upper}]")
        return k

    def value(self, k: int) -> Fraction:
        return self.q_lower + k * self.eta


def snap(new: Fraction, old_k: int, target: Fraction, grid: GridSpec) -> int:
    """Nearest grid point to ``new`` (ties toward ``target``); if that is the
    old point while the old value differs from ``target``, move one step
    toward ``target``.  A rounding that jumps past ``target`` is pulled back
    to the nearest grid point on the old side when one lies strictly between.
    """
    x = (new - grid.q_lower) / grid.eta
    lo = x.numerator // x.denominator
    frac = x - lo
    t = (target - grid.q_lower) / grid.eta
    if frac > Fraction(1, 2):
        k = lo + 1
    elif frac < Fraction(1, 2):
        k = lo
    else:
        k = lo + 1 if t > x else lo
    old = grid.value(old_k)
    if k == old_k and old != target:
        k = old_k + 1 if target > old else old_k - 1
    elif (grid.value(k) - target) * (old - target) < 0:
        # rounded past the target: keep the last grid point on the old side
        # when one lies strictly between (only reachable with alpha > 1/2)
        back = math.ceil(t) if target < old else math.floor(t)
        if back != old_k:
            k = back
    return max(0, min(grid.points_per_axis - 1, k))


class StateSpace:
    """All pairs of per-agent Q-vectors on the grid.

    A per-agent vector is indexed by ``sum_a k_a * P**a``; the joint state id
    is ``v1 * M + v2`` with ``M = P**K``.
    """

    def __init__(self, game: GameSpec, delta: float, alpha: float, eta: float,
                 q_upper: float | None = None, budget: int = 1_000_000):
        self.game = game
        self.K = game.K
        self.delta = exact(delta)
        self.alpha = exact(alpha)
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.u = [[exact(float(game.payoff[i, j])) for j in range(self.K)] for i in range(self.K)]
        u_min = min(min(r) for r in self.u)
        u_max = max(max(r) for r in self.u)
        q_lower = u_min / (1 - self.delta)
        q_up = u_max / (1 - self.delta) if q_upper is None else exact(q_upper)
        if q_up < u_max / (1 - self.delta):
            raise ValueError("q_upper must be at least max u / (1 - delta)")
        self.grid = GridSpec(exact(eta), q_lower, q_up)
        for i in range(self.K):
            for j in range(self.K):
                v = self.u[i][j] / (1 - self.delta)
                if not self.grid.on_grid(v):
                    raise GridAlignmentError(f"u({i},{j})/(1-delta) = {v} is off the grid")
        self.P = self.grid.points_per_axis
        self.M = self.P ** self.K
        self.n_states = self.M * self.M
        if self.n_states > budget:
            raise BudgetExceeded(f"{self.n_states} states exceed the budget of {budget}")
        self.order = game.rank_order()

    # per-agent vectors -------------------------------------------------
    @cached_property
    def coords(self) -> np.ndarray:
        """(M, K) integer coordinates of every per-agent vector."""
        idx = np.arange(self.M)
        out = np.empty((self.M, self.K), dtype=np.int64)
        for a in range(self.K):
            out[:, a] = (idx // self.P ** a) % self.P
        return out

    def vector_index(self, coords) -> int:
        return int(sum(int(k) * self.P ** a for a, k in enumerate(coords)))

    def vector_from_values(self, values) -> int:
        return self.vector_index([self.grid.coord(exact(v)) for v in values])

    def values_of(self, v: int) -> list[Fraction]:
        return [self.grid.value(int(k)) for k in self.coords[v]]

    @cached_property
    def argmax_mask(self) -> np.ndarray:
        """(M, K) bool: action is in the argmax set of the vector."""
        c = self.coords
        return c == c.max(axis=1, keepdims=True)

    @cached_property
    def transitions(self) -> np.ndarray:
        """(K, K, M) next vector index after playing a against b."""
        K, P, M = self.K, self.P, self.M
        g = self.grid
        w = 1 - self.alpha
        vals = [g.value(k) for k in range(P)]
        T = np.empty((K, K, M), dtype=np.int64)
        coords = self.coords
        cmax = coords.max(axis=1)
        # the new cell depends only on (old cell, max cell)
        cache: dict[tuple[int, int, int, int], int] = {}
        for a in range(K):
            stride = P ** a
            for b in range(K):
                u = self.u[a][b]
                ca = coords[:, a]
                out = np.empty(M, dtype=np.int64)
                for v in range(M):
                    key = (a, b, int(ca[v]), int(cmax[v]))
                    k = cache.get(key)
                    if k is None:
                        target = u + self.delta * vals[key[3]]
                        new = w * vals[key[2]] + self.alpha * target
                        k = snap(new, key[2], target, g)
                        cache[key] = k
                    out[v] = v + (k - int(ca[v])) * stride
                T[a, b] = out
        return T

    # joint states -------------------------------------------------------
    def split(self, s):
        return np.divmod(s, self.M)

    def state_id(self, v1: int, v2: int) -> int:
        return int(v1) * self.M + int(v2)

    def decode(self, s: int) -> tuple[list[float], list[float]]:
        v1, v2 = self.split(int(s))
        return ([float(x) for x in self.values_of(int(v1))],
                [float(x) for x in self.values_of(int(v2))])

    def successors(self, s: int) -> set[int]:
        """Images under every greedy profile (cost-0 successors)."""
        return {t for t, c in self.one_step_images(s) if c == 0}

    def one_step_images(self, s: int) -> list[tuple[int, int]]:
        """(image, cost) for every action profile played at ``s``."""
        v1, v2 = (int(x) for x in self.split(int(s)))
        T = self.transitions
        am = self.argmax_mask
        out = []
        for a in range(self.K):
            for b in range(self.K):
                img = self.state_id(T[a, b, v1], T[b, a, v2])
                out.append((img, int(not am[v1, a]) + int(not am[v2, b])))
        return out

    def one_step_cost(self, s: int, s2: int) -> float:
        costs = [c for img, c in self.one_step_images(s) if img == s2]
        return float(min(costs)) if costs else float("inf")

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Deduplicated (src, dst, min cost) over all states and profiles."""
        n = self.n_states
        s = np.arange(n, dtype=np.int64)
        v1, v2 = np.divmod(s, self.M)
        T = self.transitions
        am = self.argmax_mask
        srcs, dsts, costs = [], [], []
        for a in range(self.K):
            for b in range(self.K):
                srcs.append(s)
                dsts.append(T[a, b][v1] * self.M + T[b, a][v2])
                costs.append((~am[v1, a]).astype(np.int8) + (~am[v2, b]).astype(np.int8))
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        cost = np.concatenate(costs)
        order = np.lexsort((cost, dst, src))
        src, dst, cost = src[order], dst[order], cost[order]
        keep = np.ones(len(src), dtype=bool)
        keep[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
        return src[keep], dst[keep], cost[keep]

    # characterizations -----------------------------------------------------
    @cached_property
    def fixed_point_action(self) -> np.ndarray:
        """Per vector: the strict argmax a when Q(a) = u(a,a)/(1-delta), else -1."""
        c = self.coords
        out = np.full(self.M, -1, dtype=np.int64)
        strict = self.argmax_mask.sum(axis=1) == 1
        top = np.argmax(c, axis=1)
        fixed = np.array([self.grid.coord(self.u[a][a] / (1 - self.delta)) for a in range(self.K)])
        ok = strict & (c[np.arange(self.M), top] == fixed[top])
        out[ok] = top[ok]
        return out

    def characterized_states(self) -> np.ndarray:
        """Joint states meeting the absorbing characterization (sorted ids)."""
        pa = self.fixed_point_action
        out = []
        for a in range(self.K):
            vs = np.flatnonzero(pa == a)
            out.append((vs[:, None] * self.M + vs[None, :]).ravel())
        return np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    def sN_values(self) -> list[Fraction]:
        a1 = int(self.order[0])
        d = self.delta
        return [self.u[a][a1] + d * self.u[a1][a1] / (1 - d) for a in range(self.K)]

    def build_sN(self) -> int:
        v = self.vector_index([self.grid.coord(x) for x in self.sN_values()])
        return self.state_id(v, v)
