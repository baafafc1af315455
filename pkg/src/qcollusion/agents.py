"""Q-learning agents: Q-tables, initialization, action selection and updates.

Every random decision is drawn from an object with a ``random()`` method
returning a double in [0, 1).  Action selection consumes draws in a fixed
order (exploration test, then one draw for the explored action or for the
tie-break), which is the same order the compiled kernels use, so a session
can be replayed step by step through these functions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .games import GameSpec

MEMORYLESS = "memoryless"
MEMORY = "memory"
MODES = (MEMORYLESS, MEMORY)


@dataclass
class QState:
    """Q-values indexed by (observation, action).

    Memoryless tables have a single observation row; memory tables have one
    row per joint action pair of the previous period (index ``a0 * K + a1``).
    """

    table: np.ndarray
    mode: str = MEMORYLESS

    def __post_init__(self):
        self.table = np.ascontiguousarray(self.table, dtype=np.float64)
        if self.table.ndim != 2:
            raise ValueError("Q table must be 2-D (obs, action)")
        K = self.table.shape[1]
        expected = 1 if self.mode == MEMORYLESS else K * K
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.table.shape[0] != expected:
            raise ValueError(f"{self.mode} table needs {expected} rows, got {self.table.shape[0]}")
        if not np.all(np.isfinite(self.table)):
            raise ValueError("Q-values must be finite")

    @property
    def K(self) -> int:
        return self.table.shape[1]

    @property
    def obs_count(self) -> int:
        return self.table.shape[0]

    def row(self, obs: int = 0) -> np.ndarray:
        return self.table[obs]

    def copy(self) -> "QState":
        return QState(self.table.copy(), self.mode)


@dataclass(frozen=True)
class PolicySpec:
    """Action-selection policy.

    ``schedule`` is ``constant`` (rate ``epsilon``) or ``exp_decay``
    (eps_t = exp(-beta * t)).  Boltzmann uses the temperature
    max(tau0 * exp(-tau_decay * t), tau_min).
    """

    kind: str = "epsilon_greedy"
    schedule: str = "exp_decay"
    epsilon: float = 0.0
    beta: float = 1e-4
    tau0: float = 1.0
    tau_decay: float = 1e-4
    tau_min: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("greedy", "epsilon_greedy", "boltzmann"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "epsilon_greedy":
            if self.schedule == "constant":
                if not 0 < self.epsilon <= 1:
                    raise ValueError("constant epsilon must lie in (0, 1]")
            elif self.schedule == "exp_decay":
                if not self.beta > 0:
                    raise ValueError("beta must be positive")
            else:
                raise ValueError(f"unknown epsilon schedule {self.schedule!r}")
        if self.kind == "boltzmann" and not (self.tau0 > 0 and self.tau_min > 0 and self.tau_decay >= 0):
            raise ValueError("Boltzmann temperatures must be positive")


@dataclass(frozen=True)
class UpdateRuleSpec:
    kind: str = "asynchronous"
    alpha: float = 0.15
    delta: float = 0.95

    def __post_init__(self):
        if self.kind not in ("asynchronous", "synchronous", "synchronous_downward"):
            raise ValueError(f"unknown update rule {self.kind!r}")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "uniform_opponent"
    lo: float = 1.0
    hi: float = 2.0
    scale_by_horizon: bool = False
    table: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("uniform_opponent", "optimistic_uniform", "explicit"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "optimistic_uniform" and not self.lo < self.hi:
            raise ValueError("optimistic init needs lo < hi")
        if self.kind == "explicit" and self.table is None:
            raise ValueError("explicit init needs a table")


def epsilon_at(policy: PolicySpec, t: int) -> float:
    if policy.kind == "greedy":
        return 0.0
    if policy.schedule == "constant":
        return policy.epsilon
    return math.exp(-policy.beta * t)


def temperature_at(policy: PolicySpec, t: int) -> float:
    return max(policy.tau0 * math.exp(-policy.tau_decay * t), policy.tau_min)


def init_q(game: GameSpec, rule: UpdateRuleSpec, init: InitSpec, mode: str = MEMORYLESS,
           rng: np.random.Generator | None = None) -> QState:
    K = game.K
    n_obs = 1 if mode == MEMORYLESS else K * K
    delta = rule.delta
    if init.kind == "uniform_opponent":
        if delta >= 1:
            raise ZeroDivisionError("uniform_opponent init needs delta < 1")
        row = game.payoff.sum(axis=1) / ((1.0 - delta) * K)
        table = np.tile(row, (n_obs, 1))
    elif init.kind == "optimistic_uniform":
        if rng is None:
            raise ValueError("optimistic init needs an rng")
        table = rng.uniform(init.lo, init.hi, size=(n_obs, K))
        if init.scale_by_horizon:
            table = table / (1.0 - delta)
    else:
        table = np.array(init.table, dtype=np.float64)
        if table.ndim == 1:
            table = np.tile(table, (n_obs, 1))
        if table.shape != (n_obs, K):
            raise ValueError(f"explicit table must be {(n_obs, K)}, got {table.shape}")
    return QState(table, mode)


def argmax_set(row: np.ndarray) -> list[int]:
    m = row.max()
    return [a for a in range(row.shape[0]) if row[a] == m]


def select_action(q: QState, obs: int, policy: PolicySpec, t: int, rng) -> int:
    """Pick an action for observation ``obs`` at period ``t``.

    ``rng`` is anything exposing ``random()``.
    """
    row = q.table[obs]
    K = row.shape[0]
    if policy.kind == "boltzmann":
        tau = temperature_at(policy, t)
        m = float(row.max())
        w = [math.exp((float(row[a]) - m) / tau) for a in range(K)]
        total = 0.0
        for x in w:
            total += x
        u = rng.random() * total
        acc = 0.0
        for a in range(K):
            acc += w[a]
            if u < acc:
                return a
        return K - 1
    eps = epsilon_at(policy, t)
    if eps > 0.0:
        if rng.random() < eps:
            return int(rng.random() * K)
    best = argmax_set(row)
    if len(best) == 1:
        return best[0]
    return best[int(rng.random() * len(best))]


def update_async(q: QState, obs: int, a_self: int, a_opp: int, next_obs: int,
                 game: GameSpec, rule: UpdateRuleSpec) -> QState:
    """Weighted-average update of the chosen cell only (in place)."""
    target = float(game.payoff[a_self, a_opp]) + rule.delta * float(q.table[next_obs].max())
    old = float(q.table[obs, a_self])
    q.table[obs, a_self] = (1.0 - rule.alpha) * old + rule.alpha * target
    return q


def update_sync(q: QState, obs: int, a_opp: int, next_obs: int,
                game: GameSpec, rule: UpdateRuleSpec) -> QState:
    """Update every action with its counterfactual payoff against ``a_opp``."""
    cont = rule.delta * float(q.table[next_obs].max())
    row = q.table[obs]
    w = 1.0 - rule.alpha
    for a in range(q.K):
        row[a] = w * float(row[a]) + rule.alpha * (float(game.payoff[a, a_opp]) + cont)
    return q


def update_sync_downward(q: QState, obs: int, a_self: int, a_opp: int, next_obs: int,
                         game: GameSpec, rule: UpdateRuleSpec) -> QState:
    """Chosen cell as usual; other cells move only in the direction that the
    realized demand bounds: higher prices can only lose value, lower prices
    can only gain."""
    if game.demand is None or game.cost is None:
        raise ValueError("downward-demand updating needs a demand table and cost")
    cont = rule.delta * float(q.table[next_obs].max())
    row = q.table[obs]
    w = 1.0 - rule.alpha
    d = float(game.demand[a_self, a_opp])
    vals = game.values
    new = row.copy()
    for a in range(q.K):
        old = float(row[a])
        if a == a_self:
            new[a] = w * old + rule.alpha * (float(game.payoff[a_self, a_opp]) + cont)
            continue
        cand = w * old + rule.alpha * ((float(vals[a]) - game.cost) * d + cont)
        new[a] = min(old, cand) if a > a_self else max(old, cand)
    row[:] = new
    return q


def apply_update(q: QState, obs: int, a_self: int, a_opp: int, next_obs: int,
                 game: GameSpec, rule: UpdateRuleSpec) -> QState:
    if rule.kind == "asynchronous":
        return update_async(q, obs, a_self, a_opp, next_obs, game, rule)
    if rule.kind == "synchronous":
        return update_sync(q, obs, a_opp, next_obs, game, rule)
    return update_sync_downward(q, obs, a_self, a_opp, next_obs, game, rule)


def second_highest(row: np.ndarray) -> float:
    """Second-highest value (equals the max when the top is tied)."""
    if row.shape[0] < 2:
        raise ValueError("need at least two actions")
    return float(np.partition(row, -2)[-2])


def qstate_rows(states: Iterable[QState]) -> list[tuple[int, int, int, float]]:
    rows = []
    for agent, q in enumerate(states):
        for obs in range(q.obs_count):
            for a in range(q.K):
                rows.append((agent, obs, a, float(q.table[obs, a])))
    return rows


def write_qstates_csv(path, states: Iterable[QState]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "obs", "action", "q_value"])
        for agent, obs, a, v in qstate_rows(states):
            w.writerow([agent, obs, a, repr(v)])
