"""Experiment presets for the published figures.

Each preset expands to an experiment document: a base simulation config plus
up to two sweep axes given as dotted config paths.  ``scaled=True`` shrinks
the horizon, convergence window and session count so a preset finishes on a
desktop; the outputs carry ``scaled: true``.
"""

from __future__ import annotations

import copy

import numpy as np

ALPHAS = [round(x, 2) for x in np.arange(0.05, 0.951, 0.05)]
BETAS = [1e-5] + [round(k * 2.5e-5, 10) for k in range(1, 21)]
DELTAS = [round(x, 2) for x in np.arange(0.0, 0.951, 0.05)]

FULL = {"horizon": 1_000_000_000, "convergence_window": 100_000, "sessions": 100}
SCALED = {"horizon": 10_000_000, "convergence_window": 10_000, "sessions": 10}

BERTRAND = {"label": "bertrand", "K": 10, "min_price": 0.1, "wtp": 1.0, "cost": 0.0}


def base_config(**over) -> dict:
    cfg = {
        "game": dict(BERTRAND),
        "policy": {"kind": "epsilon_greedy", "schedule": "exp_decay", "beta": 1e-4},
        "update": {"kind": "asynchronous", "alpha": 0.15, "delta": 0.95},
        "init": {"kind": "uniform_opponent"},
        "mode": "memoryless",
        "master_seed": 20240101,
    }
    for k, v in over.items():
        if k != "game" and isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


def _constant(eps: float, T: float, scaled: bool) -> dict:
    return {"policy": {"kind": "epsilon_greedy", "schedule": "constant", "epsilon": eps},
            "T": T, "window_T": 1e4, "sessions": 20 if scaled else 100}


def _preset(pid: str, scaled: bool) -> dict:
    scale = dict(SCALED if scaled else FULL)
    if pid in ("fig3a", "fig3b"):
        delta = 0.95 if pid == "fig3a" else 0.0
        return {"config": base_config(update={"delta": delta}, **scale),
                "sweep": {"update.alpha": ALPHAS, "policy.beta": BETAS}}
    if pid == "fig4":
        axes = {"update.delta": DELTAS}
        if not scaled:
            axes["update.alpha"] = ALPHAS
        return {"config": base_config(**scale), "sweep": axes}
    if pid == "fig5":
        eps, T = (1e-4, 1e4) if scaled else (1e-6, 1e5)
        return {"config": base_config(**{**scale, **_constant(eps, T, scaled)}),
                "sweep": {"update.delta": DELTAS}}
    if pid == "fig7":
        mins = [0.1, 0.2, 0.3, 0.4, 0.5] if scaled else [round(x, 2) for x in np.arange(0.1, 0.601, 0.05)]
        return {"config": base_config(**scale), "sweep": {"game.min_price": mins}}
    if pid == "fig7_constant":
        eps, T = (1e-4, 1e4) if scaled else (1e-6, 1e5)
        mins = [0.1, 0.2, 0.3, 0.4, 0.5] if scaled else [round(x, 2) for x in np.arange(0.1, 0.601, 0.05)]
        return {"config": base_config(**{**scale, **_constant(eps, T, scaled)}),
                "sweep": {"game.min_price": mins}}
    if pid == "fig8":
        cfg = base_config(update={"delta": 0.0},
                          init={"kind": "optimistic_uniform", "lo": 1.0, "hi": 2.0},
                          trace_stride=1000 if scaled else 10_000, **scale)
        return {"config": cfg, "sweep": {}}
    if pid in ("fig10", "fig10_constant"):
        game = {"label": "mixed_auction", "K": 10, "v": 1.0, "omega": 0.5}
        omegas = [round(x, 2) for x in np.arange(0.0, 1.001, 0.1 if scaled else 0.05)]
        extra = {}
        if pid == "fig10_constant":
            eps, T = (1e-4, 1e4) if scaled else (1e-6, 1e5)
            extra = _constant(eps, T, scaled)
        return {"config": base_config(game=game, **{**scale, **extra}),
                "sweep": {"game.omega": omegas}}
    if pid in ("fig11", "fig12"):
        cfg = base_config(mode="memory", policy={"beta": 1e-5}, **scale)
        if pid == "fig12":
            return {"config": cfg, "sweep": {}}
        deltas = [0.0, 0.25, 0.5, 0.75, 0.95] if scaled else DELTAS
        return {"config": cfg, "sweep": {"update.delta": deltas}}
    raise KeyError(pid)


PRESET_IDS = ("fig3a", "fig3b", "fig4", "fig5", "fig7", "fig8", "fig10", "fig11", "fig12",
              "fig7_constant", "fig10_constant")


def expand_preset(pid: str, scaled: bool = True) -> dict:
    if pid not in PRESET_IDS:
        raise KeyError(f"unknown preset {pid!r}; choose from {', '.join(PRESET_IDS)}")
    exp = copy.deepcopy(_preset(pid, scaled))
    exp["config"]["scaled"] = scaled
    exp["preset"] = pid
    return exp
