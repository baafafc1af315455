"""Seeded sessions of repeated play between two Q-learning agents.

Session ``i`` of a batch draws everything from
``SeedSequence(master_seed, spawn_key=(i,))``, whose two children feed the
initialization generator and the play stream respectively, so results do not
depend on scheduling or thread count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import kernels
from ._pycore import draw_block_events
from .agents import (MEMORY, MEMORYLESS, InitSpec, PolicySpec, QState, UpdateRuleSpec,
                     init_q, second_highest)
from .games import GameSpec, game_from_dict, make_game

_UPDATE_CODES = {"asynchronous": 0, "synchronous": 1, "synchronous_downward": 2}
_POLICY_CODES = {"greedy": 0, "epsilon_greedy": 1, "boltzmann": 2}
TRACE_COLUMNS = ("t", "a0", "a1", "greedy0", "greedy1", "q2nd0", "q2nd1")
MAX_TRACE_ROWS = 50_000_000


@dataclass(frozen=True)
class SimConfig:
    """Everything a batch of sessions needs.

    Decay runs stop after ``convergence_window`` stable periods or at
    ``horizon``.  Constant-epsilon runs last ceil(T / epsilon) periods and
    report the price over the final ceil(window_T / epsilon) periods.
    """

    game: GameSpec
    policy: PolicySpec = field(default_factory=PolicySpec)
    update: UpdateRuleSpec = field(default_factory=UpdateRuleSpec)
    init: InitSpec = field(default_factory=InitSpec)
    mode: str = MEMORYLESS
    horizon: int = 1_000_000_000
    convergence_window: int = 100_000
    T: float = 1e5
    window_T: float = 1e4
    master_seed: int = 0
    sessions: int = 100
    trace_stride: int = 0
    threads: int | None = None
    backend: str | None = None
    scaled: bool = False

    def __post_init__(self):
        if self.mode not in (MEMORYLESS, MEMORY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if self.horizon < self.convergence_window:
            raise ValueError("horizon must be >= convergence_window")
        if self.sessions < 1:
            raise ValueError("sessions must be >= 1")
        if self.T < 0 or self.window_T < 0:
            raise ValueError("T and window_T must be nonnegative")
        if self.trace_stride < 0:
            raise ValueError("trace_stride must be >= 0")
        if self.game.K > 64:
            raise ValueError("at most 64 actions are supported")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.update.kind == "synchronous_downward" and self.game.demand is None:
            raise ValueError("downward-demand updating needs a game with a demand table")

    @property
    def constant(self) -> bool:
        return self.policy.kind == "epsilon_greedy" and self.policy.schedule == "constant"

    def to_dict(self) -> dict:
        d = {
            "game": self.game.to_dict(),
            "policy": asdict(self.policy),
            "update": asdict(self.update),
            "init": {k: (list(map(list, v)) if k == "table" and v is not None else v)
                     for k, v in asdict(self.init).items()},
            "mode": self.mode,
            "horizon": self.horizon,
            "convergence_window": self.convergence_window,
            "T": self.T,
            "window_T": self.window_T,
            "master_seed": self.master_seed,
            "sessions": self.sessions,
            "trace_stride": self.trace_stride,
            "scaled": self.scaled,
        }
        return d

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        g = d.pop("game", {"label": "bertrand"})
        game = game_from_dict(g) if "payoff" in g else make_game(g)
        policy = PolicySpec(**d.pop("policy", {}))
        update = UpdateRuleSpec(**d.pop("update", {}))
        init_d = dict(d.pop("init", {}))
        if init_d.get("table") is not None:
            init_d["table"] = tuple(tuple(r) if isinstance(r, (list, tuple)) else r
                                    for r in init_d["table"])
        init = InitSpec(**init_d)
        known = {f for f in cls.__dataclass_fields__} - {"game", "policy", "update", "init"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        for key in ("horizon", "convergence_window", "sessions", "trace_stride", "master_seed"):
            if key in d:
                d[key] = int(d[key])
        return cls(game=game, policy=policy, update=update, init=init, **d)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass
class Trace:
    """Sampled per-period state: one row per sampled period."""

    data: np.ndarray  # columns TRACE_COLUMNS
    delta: float
    values: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0].astype(np.int64)

    def rows(self) -> list[tuple]:
        out = []
        d = 1.0 - self.delta
        for t, a0, a1, _g0, _g1, s0, s1 in self.data.tolist():
            a0, a1 = int(a0), int(a1)
            out.append((int(t), a0, a1, float(self.values[a0]), float(self.values[a1]), s0, s1,
                        d * s0, d * s1, 2.0 * d * max(s0, s1)))
        return out


@dataclass
class SessionResult:
    index: int
    converged: bool
    periods_elapsed: int
    convergent_actions: tuple[int, int] | None = None
    cycle: list[tuple[int, int]] | None = None
    final_actions: tuple[int, int] | None = None
    window_weighted_price: float | None = None
    occupancy: np.ndarray | None = None
    trace: Trace | None = None
    q_final: tuple[QState, QState] | None = None
    skipped_periods: int = 0
    stepped_periods: int = 0

    @property
    def cycle_length(self) -> int | None:
        if not self.converged:
            return None
        return 1 if self.cycle is None else len(self.cycle)

    def outcome_price(self, values: np.ndarray) -> float | None:
        """Mean price of the convergent outcome (time average over a cycle)."""
        if self.convergent_actions is not None:
            a, b = self.convergent_actions
            return 0.5 * (float(values[a]) + float(values[b]))
        if self.cycle:
            return float(np.mean([0.5 * (values[a] + values[b]) for a, b in self.cycle]))
        return None


def session_streams(master_seed: int, index: int):
    """(init generator, play bit generator) for session ``index``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    init_ss, play_ss = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(init_ss)), np.random.PCG64(play_ss)


def skip_update_closed_form(q_value: float, stage_payoff: float, alpha: float, delta: float,
                            tau: int) -> float:
    """Q after ``tau`` repeated updates of the greedy cell at a symmetric profile.

    ``stage_payoff`` is u(a, a); the fixed point is u(a, a) / (1 - delta).
    """
    rho = 1.0 - alpha * (1.0 - delta)
    f = rho ** tau
    return f * q_value + (1.0 - f) * (stage_payoff / (1.0 - delta))


def can_skip(row0: np.ndarray, row1: np.ndarray, game: GameSpec, delta: float) -> int | None:
    """The shared strict argmax ``a`` if jumping ahead is safe, else None."""
    m0, m1 = row0.max(), row1.max()
    b0 = np.flatnonzero(row0 == m0)
    b1 = np.flatnonzero(row1 == m1)
    if len(b0) != 1 or len(b1) != 1 or b0[0] != b1[0]:
        return None
    a = int(b0[0])
    target = float(game.payoff[a, a]) / (1.0 - delta)
    if target > second_highest(row0) and target > second_highest(row1):
        return a
    return None


def schedule_explorations(eps: float, block: int, rng, n_blocks: int = 1,
                          agents: int = 2) -> list[np.ndarray]:
    """Exploration periods per agent: in each block a B(block, eps) count of
    distinct offsets placed uniformly.  Draw order (block, then agent) is the
    one the constant-epsilon kernel uses."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    out: list[list[int]] = [[] for _ in range(agents)]
    for b in range(n_blocks):
        for i in range(agents):
            out[i].extend(b * block + x for x in draw_block_events(block, eps, rng.random))
    return [np.asarray(x, dtype=np.int64) for x in out]


def greedy_profile(q0: QState, q1: QState, obs: int = 0) -> tuple[int, int]:
    """Lowest-index argmax of each agent at ``obs``."""
    return int(np.argmax(q0.table[obs])), int(np.argmax(q1.table[obs]))


def detect_cycle(q_pair: tuple[QState, QState], game: GameSpec, mode: str,
                 start_obs: int = 0) -> list[tuple[int, int]]:
    """Roll greedy play forward from ``start_obs`` and return the repeating
    block of action pairs (length 1 means a fixed point)."""
    q0, q1 = q_pair
    if mode == MEMORYLESS:
        return [greedy_profile(q0, q1)]
    K = game.K
    order: list[int] = []
    pos: dict[int, int] = {}
    s = start_obs
    while s not in pos:
        pos[s] = len(order)
        order.append(s)
        a0, a1 = greedy_profile(q0, q1, s)
        s = a0 * K + a1
    # the pair played from observation o is the next observation itself
    loop = order[pos[s]:]
    pairs = []
    for o in loop:
        a0, a1 = greedy_profile(q0, q1, o)
        pairs.append((a0, a1))
    return _rotate_min(pairs)


def _rotate_min(pairs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    i = min(range(len(pairs)), key=lambda j: pairs[j:] + pairs[:j])
    return pairs[i:] + pairs[:i]


def _exact_periods(x: float, eps: float) -> int:
    return math.ceil(Fraction(str(x)) / Fraction(str(eps)))


def _start(cfg: SimConfig, index: int):
    init_rng, play = session_streams(cfg.master_seed, index)
    q0 = init_q(cfg.game, cfg.update, cfg.init, cfg.mode, init_rng)
    q1 = init_q(cfg.game, cfg.update, cfg.init, cfg.mode, init_rng)
    K = cfg.game.K
    obs = int(init_rng.integers(K * K)) if cfg.mode == MEMORY else 0
    demand = cfg.game.demand if cfg.game.demand is not None else np.zeros((K, K))
    cost = cfg.game.cost if cfg.game.cost is not None else 0.0
    return q0, q1, obs, play, np.ascontiguousarray(demand, dtype=np.float64), float(cost)


def _trace_buffer(n_periods: int, stride: int) -> np.ndarray:
    if stride <= 0:
        return np.zeros((1, len(TRACE_COLUMNS)))
    rows = n_periods // stride + 2
    if rows > MAX_TRACE_ROWS:
        raise ValueError(f"trace stride {stride} would need {rows} rows")
    return np.zeros((rows, len(TRACE_COLUMNS)))


def run_decay_session(cfg: SimConfig, session_index: int = 0) -> SessionResult:
    if cfg.constant:
        raise ValueError("run_decay_session needs a non-constant policy")
    core = kernels.get_backend(cfg.backend)
    game = cfg.game
    q0, q1, obs, play, demand, cost = _start(cfg, session_index)
    trace = _trace_buffer(cfg.horizon, cfg.trace_stride)
    p = cfg.policy
    eps_kind = 0 if p.schedule == "constant" else 1
    eps_param = p.epsilon if eps_kind == 0 else p.beta
    t, converged, obs, n_trace = core.decay_kernel(
        np.ascontiguousarray(game.payoff), demand, game.values, cost,
        q0.table, q1.table, cfg.mode == MEMORY, obs,
        _UPDATE_CODES[cfg.update.kind], cfg.update.alpha, cfg.update.delta,
        _POLICY_CODES[p.kind], eps_kind, eps_param, p.tau0, p.tau_decay, p.tau_min,
        cfg.convergence_window, cfg.horizon, play, trace, cfg.trace_stride)
    pairs = detect_cycle((q0, q1), game, cfg.mode, obs)
    res = SessionResult(index=session_index, converged=bool(converged), periods_elapsed=int(t),
                        final_actions=pairs[0], q_final=(q0, q1))
    if converged:
        if len(pairs) == 1:
            res.convergent_actions = pairs[0]
        else:
            res.cycle = pairs
    if cfg.trace_stride > 0:
        res.trace = Trace(trace[:n_trace].copy(), cfg.update.delta, game.values)
    return res


def run_constant_session(cfg: SimConfig, session_index: int = 0,
                         symmetric_only: bool = True) -> SessionResult:
    from .metrics import windowed_weighted_price

    if not cfg.constant:
        raise ValueError("run_constant_session needs a constant-epsilon policy")
    core = kernels.get_backend(cfg.backend)
    game = cfg.game
    K = game.K
    eps = cfg.policy.epsilon
    total = _exact_periods(cfg.T, eps)
    window = min(_exact_periods(cfg.window_T, eps), total)
    block = max(1, round(1 / Fraction(str(eps))))
    q0, q1, obs, play, demand, cost = _start(cfg, session_index)
    occupancy = np.zeros((K, K), dtype=np.int64)
    trace = _trace_buffer(total, cfg.trace_stride)
    skipped = stepped = n_trace = 0
    if total > 0:
        obs, n_trace, skipped, stepped = core.constant_kernel(
            np.ascontiguousarray(game.payoff), demand, game.values, cost,
            q0.table, q1.table, cfg.mode == MEMORY, obs,
            _UPDATE_CODES[cfg.update.kind], cfg.update.alpha, cfg.update.delta, eps,
            block, total, total - window, play, occupancy, trace, cfg.trace_stride)
    res = SessionResult(index=session_index, converged=False, periods_elapsed=int(total),
                        occupancy=occupancy, q_final=(q0, q1),
                        final_actions=detect_cycle((q0, q1), game, cfg.mode, obs)[0],
                        skipped_periods=int(skipped), stepped_periods=int(stepped))
    if occupancy.sum() > 0:
        try:
            res.window_weighted_price = windowed_weighted_price(
                occupancy, game.values, symmetric_only=symmetric_only)
        except ValueError:
            res.window_weighted_price = None
    if cfg.trace_stride > 0:
        res.trace = Trace(trace[:n_trace].copy(), cfg.update.delta, game.values)
    return res


def run_session(cfg: SimConfig, session_index: int = 0) -> SessionResult:
    if cfg.constant:
        return run_constant_session(cfg, session_index)
    return run_decay_session(cfg, session_index)


def default_threads() -> int:
    env = os.environ.get("QCOLLUSION_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_batch(cfg: SimConfig, threads: int | None = None) -> list[SessionResult]:
    """All sessions of ``cfg`` in session order, run on a thread pool (the
    compiled kernels release the GIL)."""
    n = threads or cfg.threads or default_threads()
    idx = range(cfg.sessions)
    if n <= 1 or cfg.sessions == 1:
        return [run_session(cfg, i) for i in idx]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(lambda i: run_session(cfg, i), idx))
