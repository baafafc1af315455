"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.  Desk-scale settings throughout; every
run uses the preset master seed.
"""

from __future__ import annotations

import sys
import time
from functools import lru_cache

import numpy as np

from qcollusion.cli import write_sessions_csv
from qcollusion.engine import SimConfig, run_batch, skip_update_closed_form
from qcollusion.games import check_assumptions, make_bertrand, make_mixed_auction, make_prisoners_dilemma
from qcollusion.metrics import aggregate
from qcollusion.presets import base_config
from qcollusion.stability import (shipped_instances, valid_perturbations_auction,
                                  valid_perturbations_scan, verify)

SEED = 20240101
DESK = {"horizon": 10_000_000, "convergence_window": 10_000, "sessions": 30, "master_seed": SEED}
RESULTS: list[str] = []


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)


def desk(**over) -> SimConfig:
    doc = base_config(**DESK)
    for k, v in over.items():
        if k != "game" and isinstance(v, dict):
            doc[k].update(v)
        else:
            doc[k] = v
    return SimConfig.from_dict(doc)


@lru_cache(maxsize=None)
def mean_price(key: tuple) -> tuple[float, list]:
    cfg = desk(**{k: dict(v) if isinstance(v, tuple) else v for k, v in key})
    results = run_batch(cfg)
    return aggregate(results, cfg.game).mean_price, results


def key(**over) -> tuple:
    return tuple(sorted((k, tuple(sorted(v.items())) if isinstance(v, dict) else v)
                        for k, v in over.items()))


def test_01_assumption_suite():
    t0 = time.perf_counter()
    games = [make_bertrand(10, 0.1, 1.0), make_prisoners_dilemma(0, 1, 2, 3)]
    games += [make_mixed_auction(10, 1.0, w) for w in (0.0, 0.25, 0.5, 0.75, 1.0)]
    failures = [g.label for g in games if not check_assumptions(g).passed]
    dt = time.perf_counter() - t0
    ok = not failures and dt < 1.0
    report(1, "assumption suite", ok, f"{len(games)} games, failures={failures}, {dt:.3f}s")
    assert ok


def test_02_skip_ahead_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 10_000
    q = rng.uniform(0.0, 20.0, n)
    u = rng.uniform(0.0, 1.0, n)
    alpha = rng.uniform(0.01, 1.0, n)
    delta = rng.uniform(0.0, 0.99, n)
    tau = rng.integers(0, 1001, n)
    it = q.copy()
    for step in range(int(tau.max())):
        live = step < tau
        it[live] = (1.0 - alpha[live]) * it[live] + alpha[live] * (u[live] + delta[live] * it[live])
    closed = np.array([skip_update_closed_form(q[i], u[i], alpha[i], delta[i], int(tau[i]))
                       for i in range(n)])
    rel = np.abs(closed - it) / np.maximum(np.abs(it), 1e-300)
    dt = time.perf_counter() - t0
    ok = float(rel.max()) < 1e-9 and dt < 5.0
    report(2, "skip-ahead equivalence", ok, f"max rel err {rel.max():.2e} over {n} tuples, {dt:.2f}s")
    assert ok


def test_03_decay_collusion():
    p, _ = mean_price(key())
    ok = p >= 0.55
    report(3, "decay-eps collusion (delta=0.95)", ok, f"mean convergent price {p:.4f} (need >= 0.55)")
    assert ok


def test_04_decay_competition():
    p, _ = mean_price(key(update={"delta": 0.0}))
    ok = p <= 0.25
    report(4, "decay-eps competition (delta=0)", ok, f"mean convergent price {p:.4f} (need <= 0.25)")
    assert ok


def test_05_monotone_in_delta():
    deltas = [0.0, 0.25, 0.5, 0.75, 0.95]
    prices = [mean_price(key(update={"delta": d}))[0] for d in deltas]
    drops = [(a - b) for a, b in zip(prices, prices[1:]) if b < a]
    ok = len(drops) == 0 or (len(drops) == 1 and drops[0] <= 0.05)
    series = ", ".join(f"{d}:{p:.3f}" for d, p in zip(deltas, prices))
    report(5, "monotone in delta", ok, f"{series}; inversions={[round(x, 4) for x in drops]}")
    assert ok


def constant_cfg(delta: float) -> SimConfig:
    return desk(policy={"schedule": "constant", "epsilon": 1e-4}, update={"delta": delta},
                T=1e4, window_T=1e4, sessions=20)


def test_06_constant_epsilon_threshold():
    t0 = time.perf_counter()
    out = {}
    for d in (0.5, 0.9):
        cfg = constant_cfg(d)
        out[d] = aggregate(run_batch(cfg), cfg.game).mean_price
    ok = out[0.5] <= 0.15 and out[0.9] >= 0.45
    report(6, "constant-eps threshold", ok,
           f"window price {out[0.5]:.4f} at delta=0.5 (<= 0.15), {out[0.9]:.4f} at delta=0.9 "
           f"(>= 0.45), {time.perf_counter() - t0:.1f}s")
    assert ok


def test_07_minimum_price_knee():
    mins = [0.1, 0.2, 0.3, 0.4, 0.5]
    prices = {m: mean_price(key(game=(("label", "bertrand"), ("min_price", m))))[0] for m in mins}
    gaps = {m: abs(prices[m] - m) for m in mins if m >= 0.4}
    ok = all(g <= 0.05 for g in gaps.values())
    series = ", ".join(f"{m}:{p:.3f}" for m, p in prices.items())
    report(7, "minimum-price knee", ok, f"{series}; |price-min| for min>=0.4: "
           f"{ {m: round(g, 4) for m, g in gaps.items()} }")
    assert ok


def test_08_auction_transition():
    share = {}
    for w in (0.3, 0.9):
        game = (("K", 10), ("label", "mixed_auction"), ("omega", w), ("v", 1.0))
        _, results = mean_price(key(game=game))
        top = sum(1 for r in results if r.converged and r.convergent_actions == (9, 9))
        share[w] = top / len(results)
    ok = share[0.3] >= 0.8 and share[0.9] < 0.5
    report(8, "auction mixture transition", ok,
           f"share at bid 0.9: {share[0.3]:.2f} at omega=0.3 (>= 0.80), {share[0.9]:.2f} at omega=0.9 (< 0.50)")
    assert ok


def test_09_synchronous_updating():
    base, _ = mean_price(key())
    sync, _ = mean_price(key(update={"kind": "synchronous"}))
    down, _ = mean_price(key(update={"kind": "synchronous_downward"}))
    ok = sync <= 0.15 and down < base
    report(9, "synchronous updating", ok,
           f"sync {sync:.4f} (<= 0.15), downward {down:.4f} < async {base:.4f}")
    assert ok


def test_10_stability_verification():
    names = ["pd_delta0", "pd_delta05", "bertrand_k3"]
    lines, ok = [], True
    for name in names:
        t0 = time.perf_counter()
        rep = verify(shipped_instances()[name])
        dt = time.perf_counter() - t0
        good = rep.passed and dt < 600
        ok &= good
        lines.append(f"{name}: {rep.n_states} states, {len(rep.absorbing)} absorbing, "
                     f"stable={'{s^N}' if rep.stable_set == [rep.s_N] else rep.stable_set}, "
                     f"{'ok' if rep.passed else 'FAILED'} in {dt:.1f}s")
    report(10, "stability verification", ok, "; ".join(lines))
    assert ok


def test_11_valid_perturbation_closed_form():
    t0 = time.perf_counter()
    cells = mismatches = 0
    for K in range(2, 11):
        for tenth in range(11):
            w = tenth / 10
            for j in range(K - 1):
                b = j / K
                cells += 1
                if valid_perturbations_auction(K, 1.0, w, b) != valid_perturbations_scan(K, 1.0, w, b):
                    mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 1.0
    report(11, "valid-perturbation closed form", ok, f"{cells} cells, {mismatches} mismatches, {dt:.3f}s")
    assert ok


def sessions_csv_bytes(cfg: SimConfig) -> bytes:
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "sessions.csv"
        write_sessions_csv(path, run_batch(cfg), cfg)
        return path.read_bytes()


def test_12_determinism():
    cfgs = {"decay": desk(), "constant": constant_cfg(0.9),
            "memory": desk(mode="memory", policy={"beta": 1e-4}, sessions=8)}
    same = {name: sessions_csv_bytes(c) == sessions_csv_bytes(c.with_(threads=1))
            for name, c in cfgs.items()}
    ok = all(same.values())
    report(12, "determinism", ok, f"byte-identical session CSVs: {same}")
    assert ok


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
