"""Compare the compiled and pure-Python session kernels.

    python3 benchmarks/bench_kernels.py [--sessions N] [--horizon H]

Both backends run the same sessions from the same seeds, so the script also
checks that their outcomes agree before reporting timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qcollusion.engine import SimConfig, run_session
from qcollusion.kernels import available_backends


def scenarios(horizon: int) -> dict[str, dict]:
    base = {
        "game": {"label": "bertrand", "K": 10, "min_price": 0.1},
        "update": {"kind": "asynchronous", "alpha": 0.15, "delta": 0.95},
        "policy": {"kind": "epsilon_greedy", "schedule": "exp_decay", "beta": 1e-4},
        "horizon": horizon,
        "convergence_window": 10_000,
        "master_seed": 11,
    }
    return {
        "decay_async": base,
        "decay_sync": {**base, "update": {"kind": "synchronous", "alpha": 0.15, "delta": 0.95}},
        "decay_memory": {**base, "mode": "memory"},
        "constant_eps": {**base, "policy": {"kind": "epsilon_greedy", "schedule": "constant",
                                            "epsilon": 1e-3},
                         "T": 100.0, "window_T": 10.0},
    }


def time_backend(cfg: SimConfig, backend: str, sessions: int):
    cfg = cfg.with_(backend=backend)
    t0 = time.perf_counter()
    out = [run_session(cfg, i) for i in range(sessions)]
    return time.perf_counter() - t0, out


def fingerprint(results) -> list:
    return [(r.periods_elapsed, r.convergent_actions, r.window_weighted_price,
             float(np.sum(r.q_final[0].table) + np.sum(r.q_final[1].table))) for r in results]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sessions", type=int, default=3)
    p.add_argument("--horizon", type=int, default=2_000_000)
    args = p.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels unavailable; only the Python backend can be timed")
    print(f"{'scenario':<14}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  match")
    for name, doc in scenarios(args.horizon).items():
        cfg = SimConfig.from_dict(doc)
        timings, prints = {}, {}
        for b in backends:
            timings[b], res = time_backend(cfg, b, args.sessions)
            prints[b] = fingerprint(res)
        speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
        match = len({repr(v) for v in prints.values()}) == 1
        print(f"{name:<14}" + "".join(f"{timings[b]:>11.3f}s" for b in backends)
              + f"{speed:>9.1f}x  {'yes' if match else 'NO'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
