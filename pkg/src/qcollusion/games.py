"""Symmetric two-player stage games on ordered finite action grids.

Payoff tables are built once from exact rationals and stored as float64, so
values such as ``1 - 0.9`` and ``(1 - 0.8) / 2`` that are equal in exact arithmetic are
equal in the table too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

LABELS = ("bertrand", "pd", "mixed_auction", "custom")


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


@dataclass(frozen=True)
class ActionGrid:
    values: tuple[float, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("an action grid needs at least two actions")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("grid values must be strictly increasing")

    @property
    def K(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A symmetric game: ``payoff[i, j]`` is the payoff of playing grid action
    ``i`` against grid action ``j`` (the same table serves both players).

    ``rank[i]`` is the rank (1 = strict-NE action) of grid index ``i``.
    ``demand`` and ``cost`` are only present for games whose payoff factors as
    (price - cost) * demand, which the downward-demand update needs.
    """

    grid: ActionGrid
    payoff: np.ndarray
    rank: tuple[int, ...]
    label: str = "custom"
    params: dict = field(default_factory=dict)
    demand: np.ndarray | None = None
    cost: float | None = None

    def __post_init__(self):
        K = self.grid.K
        payoff = np.array(self.payoff, dtype=np.float64)
        if payoff.shape != (K, K):
            raise ValueError(f"payoff must be {K}x{K}, got {payoff.shape}")
        if not np.all(np.isfinite(payoff)):
            raise ValueError("payoff entries must be finite")
        if sorted(self.rank) != list(range(1, K + 1)):
            raise ValueError("rank must be a permutation of 1..K")
        if self.label not in LABELS:
            raise ValueError(f"unknown game label {self.label!r}")
        payoff.setflags(write=False)
        object.__setattr__(self, "payoff", payoff)
        object.__setattr__(self, "rank", tuple(int(r) for r in self.rank))
        if self.demand is not None:
            demand = np.array(self.demand, dtype=np.float64)
            demand.setflags(write=False)
            object.__setattr__(self, "demand", demand)

    @property
    def K(self) -> int:
        return self.grid.K

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.grid.values, dtype=np.float64)

    @property
    def floor_payoff(self) -> float:
        return float(self.payoff.min())

    def rank_order(self) -> np.ndarray:
        """Grid indices listed by rank: ``rank_order()[0]`` is a_1."""
        order = np.empty(self.K, dtype=np.intp)
        for i, r in enumerate(self.rank):
            order[r - 1] = i
        return order

    def payoff_by_rank(self) -> np.ndarray:
        order = self.rank_order()
        return self.payoff[np.ix_(order, order)]

    @property
    def nash_index(self) -> int:
        """Grid index of a_1."""
        return int(self.rank_order()[0])

    def u(self, a: float, b: float) -> float:
        """Payoff looked up by action value rather than index."""
        return float(self.payoff[self.index_of(a), self.index_of(b)])

    def index_of(self, value: float) -> int:
        vals = self.values
        i = int(np.argmin(np.abs(vals - value)))
        if not np.isclose(vals[i], value, rtol=0, atol=1e-12):
            raise KeyError(f"{value} is not on the action grid")
        return i

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "grid": list(self.grid.values),
            "payoff": self.payoff.ravel().tolist(),
            "rank": list(self.rank),
            "params": dict(self.params),
        }
        if self.grid.labels is not None:
            d["action_labels"] = list(self.grid.labels)
        if self.demand is not None:
            d["demand"] = self.demand.ravel().tolist()
            d["cost"] = self.cost
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def game_from_dict(d: dict) -> GameSpec:
    """Rebuild a game from its JSON document (row-major payoff)."""
    grid = ActionGrid(tuple(float(v) for v in d["grid"]),
                      tuple(d["action_labels"]) if d.get("action_labels") else None)
    K = grid.K
    payoff = np.asarray(d["payoff"], dtype=np.float64)
    if payoff.size != K * K:
        raise ValueError(f"payoff needs {K * K} entries, got {payoff.size}")
    demand = d.get("demand")
    return GameSpec(
        grid=grid,
        payoff=payoff.reshape(K, K),
        rank=tuple(d.get("rank", range(1, K + 1))),
        label=d.get("label", "custom"),
        params=dict(d.get("params", {})),
        demand=None if demand is None else np.asarray(demand, dtype=np.float64).reshape(K, K),
        cost=d.get("cost"),
    )


def game_from_json(text: str) -> GameSpec:
    return game_from_dict(json.loads(text))


def make_bertrand(K: int = 10, min_price: float = 0.1, wtp: float = 1.0,
                  cost: float = 0.0) -> GameSpec:
    """Homogeneous-good Bertrand duopoly with unit demand split on ties."""
    if K < 2:
        raise ValueError("K must be at least 2")
    lo, hi, c = _exact(min_price), _exact(wtp), _exact(cost)
    if not (0 <= c < lo < hi):
        raise ValueError("need 0 <= cost < min_price < wtp")
    prices = [lo + (hi - lo) * k / (K - 1) for k in range(K)]
    demand = np.zeros((K, K))
    payoff = np.zeros((K, K))
    for i, p in enumerate(prices):
        for j, q in enumerate(prices):
            if p > hi:
                d = Fraction(0)
            elif p < q:
                d = Fraction(1)
            elif p == q:
                d = Fraction(1, 2)
            else:
                d = Fraction(0)
            demand[i, j] = float(d)
            payoff[i, j] = float((p - c) * d)
    return GameSpec(
        grid=ActionGrid(tuple(float(p) for p in prices)),
        payoff=payoff,
        rank=tuple(range(1, K + 1)),
        label="bertrand",
        params={"K": K, "min_price": float(min_price), "wtp": float(wtp), "cost": float(cost)},
        demand=demand,
        cost=float(cost),
    )


def make_prisoners_dilemma(u_CD: float = 0.0, u_DD: float = 1.0, u_CC: float = 2.0,
                           u_DC: float = 3.0) -> GameSpec:
    if not (u_CD < u_DD < u_CC < u_DC):
        raise ValueError("need u_CD < u_DD < u_CC < u_DC")
    # grid index 0 = D, 1 = C
    payoff = np.array([[u_DD, u_DC], [u_CD, u_CC]], dtype=np.float64)
    return GameSpec(
        grid=ActionGrid((0.0, 1.0), ("D", "C")),
        payoff=payoff,
        rank=(1, 2),
        label="pd",
        params={"u_CD": u_CD, "u_DD": u_DD, "u_CC": u_CC, "u_DC": u_DC},
    )


def make_mixed_auction(K: int = 10, v: float = 1.0, omega: float = 0.5) -> GameSpec:
    """Two-bidder auction where the winner pays omega*b1 + (1-omega)*b2."""
    if K < 2:
        raise ValueError("K must be at least 2")
    if not 0 <= omega <= 1:
        raise ValueError("omega must lie in [0, 1]")
    if v <= 0:
        raise ValueError("v must be positive")
    V, w = _exact(v), _exact(omega)
    bids = [V * k / K for k in range(K)]
    payoff = np.zeros((K, K))
    for i, b1 in enumerate(bids):
        for j, b2 in enumerate(bids):
            if b1 > b2:
                payoff[i, j] = float(V - (w * b1 + (1 - w) * b2))
            elif b1 == b2:
                payoff[i, j] = float((V - b1) / 2)
    return GameSpec(
        grid=ActionGrid(tuple(float(b) for b in bids)),
        payoff=payoff,
        rank=tuple(K - i for i in range(K)),
        label="mixed_auction",
        params={"K": K, "v": float(v), "omega": float(omega)},
    )


@dataclass
class AssumptionReport:
    violations: list[tuple[str, tuple[int, ...]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed


def check_assumptions(game: GameSpec) -> AssumptionReport:
    """Exhaustively test the four payoff conditions over the rank-ordered table.

    Witnesses are reported in rank indices (1-based, as ``(k, k')``).
    """
    R = game.payoff_by_rank()
    K = game.K
    floor = float(R.min())
    report = AssumptionReport()
    v = report.violations

    if not floor < R[0, 0]:
        v.append(("1.1", (1, 1)))
    for k in range(1, K):
        if not R[k - 1, k - 1] < R[k, k]:
            v.append(("1.1", (k + 1, k + 1)))
    for k in range(K):
        for kp in range(k):
            if R[k, kp] != floor:
                v.append(("1.2", (k + 1, kp + 1)))
    for k in range(1, K):
        if not any(R[kp, k] >= R[k, k] for kp in range(k)):
            v.append(("1.3", (k + 1, k + 1)))
    for k in range(K):
        for kp in range(K - 1):
            if R[k, kp] > R[k, kp + 1]:
                v.append(("1.4", (k + 1, kp + 1, kp + 2)))
    return report


def benchmark_profits(game: GameSpec) -> tuple[float, float]:
    """Total profit at the strict NE and the best symmetric total profit."""
    R = game.payoff_by_rank()
    return 2.0 * float(R[0, 0]), 2.0 * float(np.max(np.diag(R)))


def valid_perturbations(game: GameSpec, k: int) -> list[int]:
    """Ranks k' < k (1-based) with u(a_k', a_k) >= u(a_k, a_k)."""
    R = game.payoff_by_rank()
    return [kp + 1 for kp in range(k - 1) if R[kp, k - 1] >= R[k - 1, k - 1]]


def make_game(spec: dict) -> GameSpec:
    """Build a game from a config fragment such as ``{"label": "bertrand", "K": 10}``."""
    spec = dict(spec)
    label = spec.pop("label", "bertrand")
    if label == "bertrand":
        return make_bertrand(**spec)
    if label == "pd":
        return make_prisoners_dilemma(**spec)
    if label == "mixed_auction":
        return make_mixed_auction(**spec)
    if label == "custom":
        return game_from_dict({"label": "custom", **spec})
    raise ValueError(f"unknown game label {label!r}")


def grid_for(values: Sequence[float]) -> ActionGrid:
    return ActionGrid(tuple(float(x) for x in values))
