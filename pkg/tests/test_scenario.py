import pytest
from hypothesis import given
from hypothesis import strategies as st

from adastab import scenario as sc
from adastab.errors import ScenarioParseError, ScenarioValidationError

from .conftest import MATRICES, SCENARIOS

SYSTEM = """
kind = system1
matrices.A = [[1, 4, 2], [5, -2, 1], [6, 3, -4]]
matrices.B = [[7, 4, -2], [-4, 6, 3], [2, -2, 5]]
initial_state = [5, -10, 20]
initial_gains = [4, 3, 2]
"""

NETWORK = """
kind = network_node
graph.n = 10
graph.rho = 0.3
graph.seed = 1
oscillator.w = 1
oscillator.a = 1
oscillator.b = 1
initial_state.seed = 2
initial_state.box = 3
initial_gains.seed = 3
initial_gains.range = [0, 1]
"""


class TestParse:
    def test_shipped_plant3(self):
        s = sc.parse_scenario(SCENARIOS / "system1_plant3.scn")
        assert s.kind == "system1"
        assert s.initial_state == (5.0, -10.0, 20.0)
        assert s.initial_gains == (4.0, 3.0, 2.0)
        assert s.gain_c == (1.0,) and s.gain_p == (1.0, 1.5, 2.0)
        assert s.matrix_b == str(MATRICES / "plant3_B.mat")

    @pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
    def test_all_shipped_parse(self, path):
        assert sc.parse_scenario(path).kind in sc.KINDS

    def test_minimal_classify(self):
        s = sc.loads(f"kind = classify\nmatrices.B = {MATRICES / 'nonh2_B.mat'}\n")
        assert s.kind == "classify"

    def test_defaults_by_kind(self):
        s = sc.loads(SYSTEM)
        assert (s.horizon, s.hold_time, s.state_eps, s.dt) == (30.0, 1.0, 1e-8, 1e-3)
        n = sc.loads(NETWORK)
        assert (n.horizon, n.hold_time, n.sync_eps, n.gain_p, n.oscillator_drive) == (50.0, 2.0, 1e-4, (1.5,), "sin")

    def test_inline_matrix_and_comments(self):
        s = sc.loads("# top\n" + SYSTEM + "delta = 0.5  # trailing\n")
        assert s.matrix_a[0] == (1.0, 4.0, 2.0) and s.delta == 0.5

    def test_relative_paths_resolved(self, tmp_path):
        (tmp_path / "b.mat").write_text("1\n2\n")
        (tmp_path / "s.scn").write_text("kind = classify\nmatrices.B = b.mat\n")
        assert sc.parse_scenario(tmp_path / "s.scn").matrix_b == str(tmp_path / "b.mat")


class TestErrors:
    def test_unknown_key_reports_line(self):
        with pytest.raises(ScenarioParseError) as exc:
            sc.loads("kind = classify\nmatrices.B = [[1]]\nbogus = 3\n")
        assert exc.value.line == 3 and exc.value.field == "bogus"

    @pytest.mark.parametrize("text", ["kind classify\n", "kind = classify\nkind = classify\n", "matrices.B = [[1]]\n",
                                      "kind = classify\nmatrices.B = [[1, 2]]\n", "kind = \n"])
    def test_parse_errors(self, text):
        with pytest.raises(ScenarioParseError):
            sc.loads(text)

    @pytest.mark.parametrize(
        "extra",
        [
            "integrator.dt = 0",
            "integrator.horizon = 0.0001",
            "integrator.output_stride = 0",
            "gain.c = 0",
            "gain.p = 0.5",
            "delta = -1",
            "initial_state.seed = 1",
            "stop.divergence_cap = 0",
        ],
    )
    def test_validation_errors(self, extra):
        with pytest.raises(ScenarioValidationError):
            sc.loads(SYSTEM + extra + "\n")

    def test_missing_required(self):
        with pytest.raises(ScenarioValidationError):
            sc.loads("kind = system1\nmatrices.B = [[1]]\n")
        with pytest.raises(ScenarioValidationError):
            sc.loads(NETWORK.replace("graph.seed = 1\n", ""))
        with pytest.raises(ScenarioValidationError):
            sc.loads("kind = wobble\n")

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ScenarioParseError):
            sc.parse_scenario(tmp_path / "missing.scn")


class TestRoundTrip:
    @pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
    def test_dumps_loads(self, path):
        s = sc.parse_scenario(path)
        assert sc.loads(sc.dumps(s)) == s

    @given(st.floats(1e-5, 1e-2), st.floats(0.5, 100), st.integers(1, 1000))
    def test_numeric_round_trip(self, dt, horizon, stride):
        s = sc.replace_fields(sc.loads(SYSTEM), dt=dt, horizon=horizon + 1, output_stride=stride)
        assert sc.loads(sc.dumps(s)) == s

    def test_override(self):
        s = sc.with_override(sc.loads(SYSTEM), "gain.c", 3)
        assert s.gain_c == (3.0,)
        with pytest.raises(ScenarioValidationError):
            sc.with_override(s, "nope", 1)
        with pytest.raises(ScenarioValidationError):
            sc.with_override(s, "integrator.dt", 0)
