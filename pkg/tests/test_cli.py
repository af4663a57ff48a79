import csv
import json

import numpy as np
import pytest

from adastab import cli, runner
from adastab import scenario as sc

from .conftest import MATRICES, SCENARIOS


def write(tmp_path, text, name="s.scn"):
    p = tmp_path / name
    p.write_text(text)
    return p


SHORT_SYSTEM = f"""
kind = system1
matrices.A = {MATRICES / 'plant3_A.mat'}
matrices.B = {MATRICES / 'plant3_B.mat'}
initial_state = [5, -10, 20]
initial_gains = [4, 3, 2]
gain.p = [1, 1.5, 2]
integrator.horizon = 0.5
integrator.output_stride = 10
"""

SMALL_NETWORK = """
kind = network_node
graph.n = 6
graph.rho = 0.5
graph.seed = 1
oscillator.w = 1
oscillator.a = 1
oscillator.b = 1
initial_state.seed = 2
initial_state.box = 3
initial_gains.seed = 3
initial_gains.range = [0, 1]
integrator.dt = 0.01
integrator.horizon = 2
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_classify_ok(self, capsys):
        assert cli.main(["classify", "classify_plant3"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["is_h_matrix"] is True

    def test_classify_not_h(self, capsys, tmp_path):
        assert cli.main(["classify", str(SCENARIOS / "classify_nonh2.scn"), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "report.json").read_text())["is_h_matrix"] is False

    def test_divergence_is_2(self, tmp_path):
        assert cli.main(["simulate", "frozen_unstable", "--out", str(tmp_path)]) == 2
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["diverged"] is True and rep["exit_code"] == 2

    def test_hypothesis_failure_is_3(self, tmp_path):
        text = SHORT_SYSTEM.replace("plant3_B.mat", "nonh2_B.mat").replace("[5, -10, 20]", "[1, 1, 1]")
        text = text.replace(str(MATRICES / "plant3_A.mat"), "[[0, 0], [0, 0]]")
        text = text.replace("[1, 1, 1]", "[1, 1]").replace("[4, 3, 2]", "[1, 4]").replace("[1, 1.5, 2]", "1")
        p = write(tmp_path, text + "delta = 1\n")
        assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 3
        assert json.loads((tmp_path / "o" / "report.json").read_text())["threshold_gains"] is None

    def test_generation_exhausted_is_3(self, tmp_path):
        p = write(tmp_path, SMALL_NETWORK.replace("graph.rho = 0.5", "graph.rho = 1e-9"))
        assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 3

    @pytest.mark.parametrize("argv", [["simulate", "/nonexistent.scn", "--out", "/tmp/x"],
                                      ["classify", "no_such_scenario"]])
    def test_missing_input_is_4(self, argv):
        assert cli.main(argv) == 4

    @pytest.mark.parametrize("argv", [["simulate"], ["bogus"], []])
    def test_usage_error_is_4(self, argv):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 4

    def test_bad_scenario_is_4(self, tmp_path):
        p = write(tmp_path, "kind = system1\nfoo = 1\n")
        assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 4

    def test_dimension_mismatch_is_4(self, tmp_path):
        p = write(tmp_path, SHORT_SYSTEM.replace("[5, -10, 20]", "[5, -10]"))
        arts = runner.run(sc.parse_scenario(p), tmp_path / "o")
        assert arts.exit_code == 4 and "initial_state" in arts.report["error"]

    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        assert "system1_plant3" in capsys.readouterr().out


class TestSimulate:
    def test_artifacts_and_echo(self, tmp_path):
        p = write(tmp_path, SHORT_SYSTEM + "delta = 0.5\n")
        assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 0
        out = tmp_path / "o"
        rep = json.loads((out / "report.json").read_text())
        np.testing.assert_allclose(rep["threshold_gains"], [24.5, 299 / 24, 113 / 6])
        rows = read_csv(out / "trajectory.csv")
        assert list(rows[0]) == ["t", "x1", "x2", "x3", "k1", "k2", "k3"]
        assert len(rows) == 51
        assert sc.parse_scenario(out / "scenario.scn") == sc.parse_scenario(p)

    def test_deterministic(self, tmp_path):
        p = write(tmp_path, SHORT_SYSTEM)
        cli.main(["simulate", str(p), "--out", str(tmp_path / "a")])
        cli.main(["simulate", str(p), "--out", str(tmp_path / "b")])
        for name in ("report.json", "trajectory.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_network_echo_reproduces(self, tmp_path):
        s = sc.loads(SMALL_NETWORK)
        first = runner.run(s, tmp_path / "a")
        assert first.exit_code == 0
        assert (tmp_path / "a" / "graph.txt").exists()
        echo = sc.parse_scenario(tmp_path / "a" / "scenario.scn")
        assert echo.graph_seed == first.report["graph_seed_used"]
        second = runner.run(echo, tmp_path / "b")
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_graph_file_scenario(self, tmp_path):
        (tmp_path / "g.txt").write_text("3 3\n0 1\n1 2\n0 2\n")
        text = SMALL_NETWORK.replace("graph.n = 6\ngraph.rho = 0.5\ngraph.seed = 1\n", "graph.file = g.txt\n")
        arts = runner.run(sc.parse_scenario(write(tmp_path, text)), tmp_path / "o")
        assert arts.exit_code == 0 and arts.report["m_edges"] == 3

    def test_disconnected_graph_file_is_3(self, tmp_path):
        (tmp_path / "g.txt").write_text("3 1\n0 1\n")
        text = SMALL_NETWORK.replace("graph.n = 6\ngraph.rho = 0.5\ngraph.seed = 1\n", "graph.file = g.txt\n")
        assert runner.run(sc.parse_scenario(write(tmp_path, text)), tmp_path / "o").exit_code == 3

    def test_seeded_draws(self):
        r = runner.resolve(sc.loads(SMALL_NETWORK))
        assert r.x0.shape == (6, 2) and np.all(np.abs(r.x0) <= 3)
        assert np.all((r.k0 > 0) & (r.k0 <= 1))
        again = runner.resolve(sc.loads(SMALL_NETWORK))
        assert np.array_equal(r.x0, again.x0) and np.array_equal(r.k0, again.k0)

    def test_plant5_report(self, tmp_path):
        arts = runner.run(sc.parse_scenario(SCENARIOS / "system2_plant5.scn"), tmp_path)
        expected = [12.2056, 9.1612, 11.2881, 14.4884, 9.5236]
        np.testing.assert_allclose(arts.report["final_gains"], expected, rtol=0.02)


class TestSweep:
    def test_empty(self, tmp_path):
        assert runner.sweep(sc.loads(SHORT_SYSTEM), "gain.c", [], tmp_path) == []
        assert cli.main(["sweep", "system1_plant3", "--param", "gain.c", "--values", "", "--out", str(tmp_path)]) == 0

    def test_non_numeric_parameter(self, tmp_path):
        with pytest.raises(ValueError):
            runner.sweep(sc.loads(SHORT_SYSTEM), "kind", [1], tmp_path)
        assert cli.main(["sweep", "system1_plant3", "--param", "gain.c", "--values", "a,b",
                         "--out", str(tmp_path)]) == 4

    def test_gain_rate_trend(self, tmp_path):
        # recorded trend, not an invariant: larger c settles no later
        base = sc.parse_scenario(SCENARIOS / "system1_plant3.scn")
        runner.sweep(base, "gain.c", [1, 3], tmp_path)
        rows = read_csv(tmp_path / "summary.csv")
        assert [r["status"] for r in rows] == ["ok", "ok"]
        assert float(rows[1]["settle_time"]) <= float(rows[0]["settle_time"])

    def test_bad_value_recorded(self, tmp_path):
        runner.sweep(sc.loads(SHORT_SYSTEM), "integrator.dt", [1e-3, 0], tmp_path)
        rows = read_csv(tmp_path / "summary.csv")
        assert [r["exit_code"] for r in rows] == ["0", "4"]
        assert rows[1]["error"]

    def test_dt_sweep_fourth_order(self, tmp_path):
        base = sc.replace_fields(sc.loads(SHORT_SYSTEM), gain_c=(3.0,), gain_p=(2.0,), output_stride=1)
        dts = [1e-3, 5e-4, 2.5e-4]
        results = runner.sweep(base, "integrator.dt", dts, tmp_path)
        finals = [np.array(r.report["final_state"] + r.report["final_gains"]) for r in results]
        ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
        assert 12 <= ratio <= 20

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        base = sc.loads(SHORT_SYSTEM)
        runner.sweep(base, "gain.c", [1, 2], tmp_path / "serial", workers=1)
        monkeypatch.setenv("ADASTAB_WORKERS", "2")
        runner.sweep(base, "gain.c", [1, 2], tmp_path / "par")
        for i in range(2):
            a = (tmp_path / "serial" / f"run_{i:03d}" / "trajectory.csv").read_bytes()
            assert a == (tmp_path / "par" / f"run_{i:03d}" / "trajectory.csv").read_bytes()

    def test_default_workers(self, monkeypatch):
        monkeypatch.setenv("ADASTAB_WORKERS", "3")
        assert runner.default_workers() == 3
        monkeypatch.setenv("ADASTAB_WORKERS", "x")
        assert runner.default_workers() == 1


class TestSelftest:
    def test_all_checks_pass(self, capsys):
        assert cli.main(["selftest", "--seed", "0"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 8 and all(l.startswith("PASS") for l in lines)
