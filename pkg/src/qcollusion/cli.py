"""Command-line driver: simulations, sweeps, figure presets and stability runs.

Exit codes: 0 success, 2 configuration error, 3 budget exceeded,
4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import inspect
import itertools
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import kernels
from .engine import SimConfig, run_batch
from .agents import InitSpec, PolicySpec, UpdateRuleSpec
from .games import make_bertrand, make_game, make_mixed_auction, make_prisoners_dilemma
from .metrics import aggregate, session_price
from .presets import PRESET_IDS, expand_preset
from .stability import BudgetExceeded, GridAlignmentError, Instance, shipped_instances, verify

log = logging.getLogger("qcollusion")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_VERIFY = 0, 2, 3, 4
MAX_AXES = 2
GAME_BUILDERS = {"bertrand": make_bertrand, "pd": make_prisoners_dilemma,
                 "mixed_auction": make_mixed_auction}


class ConfigError(Exception):
    pass


def load_json(path: str | os.PathLike) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def set_path(doc: dict, path: str, value) -> None:
    keys = path.split(".")
    cur = doc
    for k in keys[:-1]:
        if k not in cur or not isinstance(cur[k], dict):
            raise ConfigError(f"sweep axis {path!r} does not name a config field")
        cur = cur[k]
    if keys[-1] not in cur and not _settable(cur, keys):
        raise ConfigError(f"sweep axis {path!r} does not name a config field")
    cur[keys[-1]] = value


def _settable(cur: dict, keys: list[str]) -> bool:
    """Whether a field absent from the document is still a valid config field."""
    leaf = keys[-1]
    if len(keys) == 1:
        return leaf in SimConfig.__dataclass_fields__
    specs = {"policy": PolicySpec, "update": UpdateRuleSpec, "init": InitSpec}
    if keys[0] in specs:
        return leaf in specs[keys[0]].__dataclass_fields__
    if keys[0] == "game":
        builder = GAME_BUILDERS.get(cur.get("label", "bertrand"))
        return builder is not None and leaf in inspect.signature(builder).parameters
    return False


def split_experiment(doc: dict) -> tuple[dict, dict, dict]:
    """(simulation config, sweep axes, driver options) from one document."""
    doc = copy.deepcopy(doc)
    sweep = doc.pop("sweep", {}) or {}
    opts = {k: doc.pop(k) for k in ("out", "preset") if k in doc}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must map dotted field paths to value lists")
    return doc, sweep, opts


def build_config(doc: dict, seed: int | None = None, threads: int | None = None) -> SimConfig:
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc["master_seed"] = seed
    if threads is not None:
        doc["threads"] = threads
    try:
        return SimConfig.from_dict(doc)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sessions_csv(path: Path, results, cfg: SimConfig) -> None:
    h, seed = cfg.config_hash(), cfg.master_seed
    vals = cfg.game.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["session", "converged", "periods_elapsed", "action0", "action1", "price0",
                    "price1", "cycle_length", "cycle", "outcome_price", "window_price",
                    "config_hash", "master_seed"])
        for r in results:
            a = r.convergent_actions or r.final_actions
            cyc = ";".join(f"{x}-{y}" for x, y in r.cycle) if r.cycle else ""
            w.writerow([r.index, int(r.converged), r.periods_elapsed, a[0], a[1],
                        _fmt(float(vals[a[0]])), _fmt(float(vals[a[1]])),
                        _fmt(r.cycle_length), cyc, _fmt(session_price(r, cfg.game)),
                        _fmt(r.window_weighted_price), h, seed])


def write_trace_csv(path: Path, result, cfg: SimConfig) -> None:
    h, seed = cfg.config_hash(), cfg.master_seed
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "a1", "a2", "price1", "price2", "q2nd_1", "q2nd_2", "sustainable_1",
                    "sustainable_2", "stationary", "config_hash", "master_seed"])
        for row in result.trace.rows():
            w.writerow([_fmt(x) for x in row] + [h, seed])


def session_summary(r, cfg: SimConfig) -> dict:
    return {
        "session": r.index,
        "converged": r.converged,
        "periods_elapsed": r.periods_elapsed,
        "convergent_actions": list(r.convergent_actions) if r.convergent_actions else None,
        "cycle": [list(p) for p in r.cycle] if r.cycle else None,
        "final_actions": list(r.final_actions) if r.final_actions else None,
        "price": session_price(r, cfg.game),
        "window_weighted_price": r.window_weighted_price,
    }


def run_simulation(cfg: SimConfig, out: Path, extra: dict | None = None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = run_batch(cfg)
    log.info("%d sessions in %.1fs (%s kernels)", cfg.sessions, time.perf_counter() - t0,
             kernels.BACKEND)
    rep = aggregate(results, cfg.game)
    summary = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "scaled": cfg.scaled,
        "aggregate": rep.to_dict(),
        "sessions": [session_summary(r, cfg) for r in results],
    }
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_sessions_csv(out / "sessions.csv", results, cfg)
    for r in results:
        if r.trace is not None:
            write_trace_csv(out / f"trace_{r.index}.csv", r, cfg)
    return summary


def run_sweep(doc: dict, axes: dict, out: Path, seed=None, threads=None, extra=None) -> int:
    if len(axes) > MAX_AXES:
        raise ConfigError(f"at most {MAX_AXES} sweep axes are allowed, got {len(axes)}")
    if not axes:
        run_simulation(build_config(doc, seed, threads), out, extra)
        return EXIT_OK
    names = list(axes)
    for n in names:
        if not isinstance(axes[n], list) or not axes[n]:
            raise ConfigError(f"sweep axis {n!r} needs a non-empty list of values")
        probe = copy.deepcopy(doc)
        set_path(probe, n, axes[n][0])
    out.mkdir(parents=True, exist_ok=True)
    base = build_config(doc, seed, threads)
    rows = []
    for combo in itertools.product(*(axes[n] for n in names)):
        cell = copy.deepcopy(doc)
        for n, v in zip(names, combo):
            set_path(cell, n, v)
        row = {f"param{i + 1}": v for i, v in enumerate(combo)}
        try:
            cfg = build_config(cell, seed, threads)
            rep = aggregate(run_batch(cfg), cfg.game)
            row.update(mean_price=rep.mean_price, ci=rep.collusion_index, n_sessions=rep.n_sessions,
                       share_converged=rep.share_converged, std_error=rep.std_error,
                       cycle_hist=json.dumps(rep.cycle_length_histogram, sort_keys=True),
                       config_hash=cfg.config_hash(), error="")
        except ConfigError as exc:
            row.update(mean_price=None, ci=None, n_sessions=0, share_converged=None,
                       std_error=None, cycle_hist="", config_hash="", error=str(exc))
        log.info("cell %s -> %s", combo, row["mean_price"])
        rows.append(row)
    cols = [f"param{i + 1}" for i in range(len(names))] + [
        "mean_price", "ci", "n_sessions", "share_converged", "std_error", "cycle_hist",
        "config_hash", "error", "master_seed"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            row["master_seed"] = base.master_seed
            w.writerow([_fmt(row[c]) for c in cols])
    meta = {"axes": {f"param{i + 1}": n for i, n in enumerate(names)}, "values": axes,
            "base_config": base.to_dict(), "config_hash": base.config_hash(),
            "master_seed": base.master_seed, "scaled": base.scaled}
    if extra:
        meta.update(extra)
    (out / "sweep.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_json(args.config)
    sim, _sweep, opts = split_experiment(doc)
    cfg = build_config(sim, args.seed, args.threads)
    out = Path(args.out or opts.get("out", "out"))
    run_simulation(cfg, out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = load_json(args.config)
    sim, axes, opts = split_experiment(doc)
    return run_sweep(sim, axes, Path(args.out or opts.get("out", "out")), args.seed, args.threads)


def cmd_replicate(args) -> int:
    pid = args.preset or args.figure
    if pid is None:
        raise ConfigError("name a preset")
    try:
        exp = expand_preset(pid, scaled=not args.full)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    out = Path(args.out or f"out/{pid}")
    return run_sweep(exp["config"], exp["sweep"], out, args.seed, args.threads,
                     extra={"preset": pid})


def stability_instance(doc: dict) -> Instance:
    if "instance" in doc:
        name = doc["instance"]
        inst = shipped_instances().get(name)
        if inst is None:
            raise ConfigError(f"unknown instance {name!r}; choose from {sorted(shipped_instances())}")
        return inst
    try:
        return Instance(name=doc.get("name", "custom"), game=make_game(doc["game"]),
                        delta=float(doc["delta"]), alpha=float(doc.get("alpha", 0.5)),
                        eta=float(doc.get("eta", 0.25)),
                        q_upper=None if doc.get("q_upper") is None else float(doc["q_upper"]),
                        budget=int(doc.get("budget", 1_000_000)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid stability config: {exc}") from exc


def cmd_stability(args) -> int:
    doc = load_json(args.config) if args.config else {"instance": args.instance}
    inst = stability_instance(doc)
    try:
        report = verify(inst)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (GridAlignmentError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out or opts_out(doc, "out/stability"))
    out.mkdir(parents=True, exist_ok=True)
    body = report.to_dict()
    body["instance"] = inst.to_dict()
    (out / "stability.json").write_text(json.dumps(body, indent=2) + "\n")
    if args.dot:
        (out / "cost_digraph.dot").write_text(report.to_dot())
    log.info("%s: %s", inst.name, "all checks pass" if report.passed else "CHECK FAILED")
    return EXIT_OK if report.passed else EXIT_VERIFY


def opts_out(doc: dict, default: str) -> str:
    return doc.get("out", default)


def nu(K: int, beta: float) -> float:
    """Expected explorations per action over a decaying-epsilon run."""
    return 1.0 / (K * (1.0 - math.exp(-beta)))


def cmd_nu(args) -> int:
    print(f"{nu(args.K, args.beta):.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcollusion", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)

    sp = sub.add_parser("simulate", help="run one batch of sessions")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="Cartesian sweep over up to two config fields")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("replicate", help="run a figure preset")
    sp.add_argument("figure", nargs="?", choices=PRESET_IDS)
    sp.add_argument("--preset", choices=PRESET_IDS)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--scaled", action="store_true", default=True)
    g.add_argument("--full", action="store_true")
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("stability", help="verify a discretized instance")
    sp.add_argument("--config")
    sp.add_argument("--instance", default="pd_delta05")
    sp.add_argument("--out")
    sp.add_argument("--dot", action="store_true", help="also write cost_digraph.dot")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("nu", help="expected explorations per action for (K, beta)")
    sp.add_argument("--K", type=int, default=10)
    sp.add_argument("--beta", type=float, default=1e-4)
    sp.set_defaults(func=cmd_nu)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
