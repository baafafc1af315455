import csv
import json

import pytest

from qcollusion import cli
from qcollusion.presets import ALPHAS, BETAS, PRESET_IDS, expand_preset

BASE = {
    "game": {"label": "bertrand", "K": 10, "min_price": 0.1},
    "update": {"kind": "asynchronous", "alpha": 0.15, "delta": 0.95},
    "policy": {"kind": "epsilon_greedy", "schedule": "exp_decay", "beta": 1e-3},
    "horizon": 1_000_000,
    "convergence_window": 1_000,
    "sessions": 4,
    "master_seed": 17,
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_writes_outputs(self, tmp_path):
        out = tmp_path / "run"
        rc = cli.main(["simulate", "--config", write(tmp_path, {**BASE, "trace_stride": 500}),
                       "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        rows = read_csv(out / "sessions.csv")
        assert len(rows) == 4 and summary["aggregate"]["n_sessions"] == 4
        assert {r["config_hash"] for r in rows} == {summary["config_hash"]}
        assert {r["master_seed"] for r in rows} == {"17"}
        trace = read_csv(out / "trace_0.csv")
        assert list(trace[0])[:10] == ["t", "a1", "a2", "price1", "price2", "q2nd_1", "q2nd_2",
                                       "sustainable_1", "sustainable_2", "stationary"]
        assert "timings" not in json.dumps(summary)

    def test_same_seed_gives_identical_csv(self, tmp_path):
        cfg = write(tmp_path, BASE)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1"])
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"])
        assert (tmp_path / "a/sessions.csv").read_bytes() == (tmp_path / "b/sessions.csv").read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, BASE)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"])
        assert json.loads((tmp_path / "a/summary.json").read_text())["master_seed"] == 5

    def test_embedded_config_reproduces_output(self, tmp_path):
        cli.main(["simulate", "--config", write(tmp_path, BASE), "--out", str(tmp_path / "a")])
        echoed = json.loads((tmp_path / "a/summary.json").read_text())["config"]
        cli.main(["simulate", "--config", write(tmp_path, echoed, "echo.json"),
                  "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/sessions.csv").read_bytes() == (tmp_path / "b/sessions.csv").read_bytes()

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "game": {"label": "bertrand",}\n}')
        assert cli.main(["simulate", "--config", str(p)]) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "column" in err

    def test_invalid_field(self, tmp_path):
        assert cli.main(["simulate", "--config", write(tmp_path, {**BASE, "horizn": 3})]) == 2


class TestSweep:
    def test_single_axis(self, tmp_path):
        doc = {**BASE, "sweep": {"update.delta": [0.0, 0.5, 0.95]}}
        assert cli.main(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path / "s")]) == 0
        rows = read_csv(tmp_path / "s/sweep.csv")
        assert [r["param1"] for r in rows] == ["0.0", "0.5", "0.95"]
        assert all(r["error"] == "" and r["n_sessions"] == "4" for r in rows)

    def test_two_axes_are_row_complete(self, tmp_path):
        doc = {**BASE, "sessions": 2, "sweep": {"update.alpha": [0.1, 0.2], "game.min_price": [0.1, 1.5]}}
        assert cli.main(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path / "s")]) == 0
        rows = read_csv(tmp_path / "s/sweep.csv")
        assert len(rows) == 4
        failed = [r for r in rows if r["error"]]
        assert len(failed) == 2 and all(r["param2"] == "1.5" for r in failed)

    def test_three_axes_rejected(self, tmp_path):
        doc = {**BASE, "sweep": {"update.alpha": [0.1], "update.delta": [0.5], "policy.beta": [1e-4]}}
        assert cli.main(["sweep", "--config", write(tmp_path, doc)]) == 2

    def test_unknown_axis_rejected(self, tmp_path):
        doc = {**BASE, "sweep": {"update.gamma": [0.1]}}
        assert cli.main(["sweep", "--config", write(tmp_path, doc)]) == 2

    def test_empty_sweep_behaves_as_simulate(self, tmp_path):
        doc = {**BASE, "sweep": {}}
        cli.main(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path / "s")])
        cli.main(["simulate", "--config", write(tmp_path, BASE, "b.json"), "--out", str(tmp_path / "m")])
        assert (tmp_path / "s/sessions.csv").read_bytes() == (tmp_path / "m/sessions.csv").read_bytes()


class TestPresets:
    def test_ids(self):
        for pid in ("fig3a", "fig3b", "fig4", "fig5", "fig7", "fig8", "fig10", "fig11", "fig12"):
            assert pid in PRESET_IDS

    def test_heatmap_grid(self):
        exp = expand_preset("fig3a", scaled=False)
        assert len(ALPHAS) * len(BETAS) == 399
        assert exp["sweep"] == {"update.alpha": ALPHAS, "policy.beta": BETAS}
        assert exp["config"]["horizon"] == 1_000_000_000 and not exp["config"]["scaled"]

    def test_fig3b_is_fig3a_at_zero_discount(self):
        a, b = expand_preset("fig3a"), expand_preset("fig3b")
        a["config"]["update"]["delta"] = 0.0
        assert a["config"] == b["config"] and a["sweep"] == b["sweep"]

    def test_min_price_and_auction_axes(self):
        assert "game.min_price" in expand_preset("fig7")["sweep"]
        omegas = expand_preset("fig10")["sweep"]["game.omega"]
        assert min(omegas) < 0.45 < max(omegas)

    @pytest.mark.parametrize("pid", PRESET_IDS)
    @pytest.mark.parametrize("scaled", [True, False])
    def test_presets_resolve(self, pid, scaled):
        from qcollusion.engine import SimConfig
        exp = expand_preset(pid, scaled)
        cfg = SimConfig.from_dict(exp["config"])
        assert cfg.scaled == scaled
        for path, values in exp["sweep"].items():
            doc = json.loads(json.dumps(exp["config"]))
            cli.set_path(doc, path, values[-1])
            SimConfig.from_dict(doc)

    def test_unknown_preset(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["replicate", "fig99"])
        assert exc.value.code == 2

    def test_replicate_runs(self, tmp_path, monkeypatch):
        def tiny(pid, scaled=True):
            exp = expand_preset(pid, scaled)
            exp["config"].update(sessions=2, horizon=200_000, convergence_window=500)
            exp["sweep"] = {"game.min_price": [0.1, 0.4]}
            return exp
        monkeypatch.setattr(cli, "expand_preset", tiny)
        assert cli.main(["replicate", "fig7", "--out", str(tmp_path / "r")]) == 0
        meta = json.loads((tmp_path / "r/sweep.json").read_text())
        assert meta["scaled"] is True and meta["preset"] == "fig7"
        assert len(read_csv(tmp_path / "r/sweep.csv")) == 2


class TestStability:
    def test_shipped_instance(self, tmp_path):
        cfg = write(tmp_path, {"instance": "pd_small"})
        assert cli.main(["stability", "--config", cfg, "--out", str(tmp_path / "st"), "--dot"]) == 0
        rep = json.loads((tmp_path / "st/stability.json").read_text())
        assert rep["passed"] and len(rep["arborescence_costs"]) == len(rep["absorbing"])
        assert (tmp_path / "st/cost_digraph.dot").read_text().startswith("digraph")

    def test_explicit_instance(self, tmp_path):
        doc = {"name": "pd", "game": {"label": "pd"}, "delta": 0.0, "eta": 1.0}
        assert cli.main(["stability", "--config", write(tmp_path, doc), "--out", str(tmp_path / "x")]) == 0

    def test_misaligned_grid(self, tmp_path):
        doc = {"game": {"label": "pd"}, "delta": 0.0, "eta": 0.3}
        assert cli.main(["stability", "--config", write(tmp_path, doc)]) == 2

    def test_budget(self, tmp_path):
        doc = {"game": {"label": "pd"}, "delta": 0.0, "eta": 0.05, "budget": 1000}
        assert cli.main(["stability", "--config", write(tmp_path, doc)]) == 3

    def test_unknown_instance(self, tmp_path):
        assert cli.main(["stability", "--config", write(tmp_path, {"instance": "nope"})]) == 2

    def test_failed_check_exit_code(self, tmp_path, monkeypatch):
        from qcollusion.stability import verify

        def broken(inst):
            rep = verify(inst)
            rep.lemma3_ok = False
            return rep
        monkeypatch.setattr(cli, "verify", broken)
        cfg = write(tmp_path, {"instance": "pd_small"})
        assert cli.main(["stability", "--config", cfg, "--out", str(tmp_path / "f")]) == 4


def test_nu(capsys):
    assert cli.main(["nu", "--K", "10", "--beta", "1e-4"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1000.05, rel=1e-4)
    assert cli.nu(10, 1e-4) == pytest.approx(1 / (10 * (1 - 0.99990000499983)), rel=1e-9)
