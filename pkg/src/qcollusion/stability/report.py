"""End-to-end verification of a discretized instance."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..games import GameSpec, check_assumptions, make_bertrand, make_mixed_auction, make_prisoners_dilemma
from .graph import (arborescence_costs, cost_graph, min_costs_between, reachable,
                    recurrent_classes)
from .grid import StateSpace
from .order import check_lemma6, check_order, g_candidates, order_matrix, OrderCheck, summarize


@dataclass(frozen=True)
class Instance:
    name: str
    game: GameSpec
    delta: float
    alpha: float = 0.5
    eta: float = 0.25
    q_upper: float | None = None
    budget: int = 1_000_000

    def space(self) -> StateSpace:
        return StateSpace(self.game, self.delta, self.alpha, self.eta, self.q_upper, self.budget)

    def to_dict(self) -> dict:
        return {"name": self.name, "game": self.game.to_dict(), "delta": self.delta,
                "alpha": self.alpha, "eta": self.eta, "q_upper": self.q_upper,
                "budget": self.budget}


def shipped_instances() -> dict[str, Instance]:
    pd = make_prisoners_dilemma(0, 1, 2, 3)
    out = {
        "pd_delta0": Instance("pd_delta0", pd, 0.0, eta=0.25),
        "pd_delta05": Instance("pd_delta05", pd, 0.5, eta=0.25, q_upper=6.0),
        "bertrand_k3": Instance("bertrand_k3", make_bertrand(3, 0.5, 1.0), 0.5, eta=0.25, q_upper=1.5),
        "pd_small": Instance("pd_small", pd, 0.0, eta=0.5),
        "bertrand_k2": Instance("bertrand_k2", make_bertrand(2, 0.5, 1.0), 0.5, eta=0.25),
    }
    for w, tag in ((0.0, "0"), (0.5, "05"), (1.0, "1")):
        out[f"auction_k3_omega{tag}"] = Instance(
            f"auction_k3_omega{tag}", make_mixed_auction(3, 3.0, w), 0.0, eta=0.5)
    return out


@dataclass
class StabilityReport:
    name: str
    n_states: int
    recurrent_classes: list[list[int]]
    all_singletons: bool
    absorbing_characterization_ok: bool
    s_N: int
    absorbing: list[int]
    arborescence_costs: dict[int, float]
    stable_set: list[int]
    lemma3_ok: bool
    lemma3_details: dict
    cost_sanity_ok: bool
    order_checks: dict
    per_g: list[OrderCheck] = field(default_factory=list)
    assumptions_ok: bool = True
    decoded: dict[int, tuple] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    cost_matrix: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        oc = self.order_checks
        return (self.all_singletons and self.absorbing_characterization_ok
                and self.stable_set == [self.s_N] and self.lemma3_ok and self.cost_sanity_ok
                and oc["irreflexive"] and oc["transitive"] and oc["sN_lowest"] and oc["lemma6_ok"])

    def to_dict(self) -> dict:
        def num(x):
            return None if np.isinf(x) else int(x) if float(x).is_integer() else float(x)
        return {
            "name": self.name,
            "passed": self.passed,
            "n_states": self.n_states,
            "n_recurrent_classes": len(self.recurrent_classes),
            "recurrent_class_sizes": sorted({len(c) for c in self.recurrent_classes}),
            "all_singletons": self.all_singletons,
            "absorbing_characterization_ok": self.absorbing_characterization_ok,
            "assumptions_ok": self.assumptions_ok,
            "s_N": self.s_N,
            "s_N_q": self.decoded.get(self.s_N),
            "absorbing": [{"id": s, "q": self.decoded.get(s),
                           "tree_cost": num(self.arborescence_costs[s])} for s in self.absorbing],
            "arborescence_costs": {str(k): num(v) for k, v in self.arborescence_costs.items()},
            "stable_set": self.stable_set,
            "lemma3_ok": self.lemma3_ok,
            "lemma3_details": self.lemma3_details,
            "cost_sanity_ok": self.cost_sanity_ok,
            "order_checks": self.order_checks,
            "per_g": [c.to_dict() for c in self.per_g],
            "timings": self.timings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_dot(self) -> str:
        """Absorbing-state cost digraph (finite off-diagonal edges)."""
        lines = ["digraph costs {"]
        for s in self.absorbing:
            shape = "doublecircle" if s == self.s_N else "circle"
            lines.append(f'  s{s} [shape={shape}, label="{s}"];')
        C = self.cost_matrix
        if C is not None:
            for i, s in enumerate(self.absorbing):
                for j, t in enumerate(self.absorbing):
                    if i != j and np.isfinite(C[i, j]):
                        lines.append(f'  s{s} -> s{t} [label="{int(C[i, j])}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def check_lemma3(space: StateSpace, zero_graph, closed: np.ndarray, sN: int,
                 C_row: np.ndarray, absorbing: np.ndarray) -> tuple[bool, dict]:
    """Every single-agent deviation from s^N flows back to s^N alone, and
    s^N needs two mutations to reach any other absorbing state."""
    a1 = int(space.order[0])
    v1, v2 = (int(x) for x in space.split(sN))
    T = space.transitions
    c = space.coords
    others = absorbing != sN
    cost_ok = bool((C_row[others] >= 2).all())
    flows_back = True
    unchanged = True
    opp_not_lower = True
    for dev in range(space.K):
        if dev == a1:
            continue
        for agent in (0, 1):
            if agent == 0:
                n1, n2 = int(T[dev, a1, v1]), int(T[a1, dev, v2])
                own_old, own_new, opp_old, opp_new = v1, n1, v2, n2
            else:
                n1, n2 = int(T[a1, dev, v1]), int(T[dev, a1, v2])
                own_old, own_new, opp_old, opp_new = v2, n2, v1, n1
            img = space.state_id(n1, n2)
            if c[own_new, dev] != c[own_old, dev]:
                unchanged = False
            if c[opp_new, a1] < c[opp_old, a1]:
                opp_not_lower = False
            reach = reachable(zero_graph, img)
            terminal = reach[closed[reach]]
            if not (len(terminal) == 1 and terminal[0] == sN):
                flows_back = False
    details = {"cost_ge_2": cost_ok, "deviations_flow_back": flows_back,
               "deviator_value_unchanged": unchanged, "opponent_a1_not_lower": opp_not_lower}
    return cost_ok and flows_back, details


def verify(instance: Instance, g_cap: int = 256) -> StabilityReport:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    space = instance.space()
    n = space.n_states
    src, dst, cost = space.edges()
    timings["transitions"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    zero = cost == 0
    classes = recurrent_classes(n, src[zero], dst[zero])
    all_singletons = all(len(c) == 1 for c in classes)
    absorbing = np.sort(np.array([int(c[0]) for c in classes if len(c) == 1], dtype=np.int64))
    recurrent = np.sort(np.concatenate(classes)) if classes else np.zeros(0, dtype=np.int64)
    characterized = space.characterized_states()
    char_ok = all_singletons and np.array_equal(recurrent, characterized)
    closed = np.zeros(n, dtype=bool)
    closed[recurrent] = True
    timings["recurrent_classes"] = time.perf_counter() - t0

    sN = space.build_sN()
    if sN not in set(absorbing.tolist()):
        raise RuntimeError("s^N is not absorbing on this grid")
    sN_index = int(np.searchsorted(absorbing, sN))

    t0 = time.perf_counter()
    graph = cost_graph(n, src, dst, cost)
    C = min_costs_between(graph, absorbing)
    timings["path_costs"] = time.perf_counter() - t0
    off = ~np.eye(len(absorbing), dtype=bool)
    cost_sanity = bool((C[off] >= 1).all())

    t0 = time.perf_counter()
    tree = arborescence_costs(C)
    best = tree.min()
    stable = [int(absorbing[i]) for i in np.flatnonzero(tree == best)]
    timings["arborescences"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    zero_graph = cost_graph(n, src[zero], dst[zero], cost[zero])
    lemma3_ok, lemma3_details = check_lemma3(space, zero_graph, closed, sN, C[sN_index], absorbing)
    timings["lemma3"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    summary = summarize(space, absorbing, sN)
    per_g = []
    for g in g_candidates(instance.game, g_cap) or [{}]:
        M = order_matrix(summary, g)
        irr, trans, low = check_order(M, sN_index)
        fails = check_lemma6(C, M, sN_index)
        per_g.append(OrderCheck(g, irr, trans, low, len(fails) == 0, int(len(fails))))
    timings["order"] = time.perf_counter() - t0

    order_checks = {
        "irreflexive": all(c.irreflexive for c in per_g),
        "transitive": all(c.transitive for c in per_g),
        "sN_lowest": all(c.sN_lowest for c in per_g),
        "lemma6_ok": any(c.lemma6 for c in per_g),
        "g_choices": len(per_g),
        "g_agree": len({c.lemma6 for c in per_g}) == 1,
    }
    decoded = {int(s): space.decode(int(s)) for s in absorbing}
    return StabilityReport(
        name=instance.name,
        n_states=n,
        recurrent_classes=[c.tolist() for c in classes],
        all_singletons=all_singletons,
        absorbing_characterization_ok=bool(char_ok),
        s_N=int(sN),
        absorbing=absorbing.tolist(),
        arborescence_costs={int(s): float(c) for s, c in zip(absorbing, tree)},
        stable_set=stable,
        lemma3_ok=lemma3_ok,
        lemma3_details=lemma3_details,
        cost_sanity_ok=cost_sanity,
        order_checks=order_checks,
        per_g=per_g,
        assumptions_ok=check_assumptions(instance.game).passed,
        decoded=decoded,
        timings={k: round(v, 3) for k, v in timings.items()},
        cost_matrix=C,
    )
