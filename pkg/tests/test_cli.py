import json

import numpy as np
import pandas as pd
import pytest

from minerr import __version__
from minerr.cli import main, build_parser

from conftest import G1


@pytest.fixture
def example_doc(scenario_path):
    return json.loads(scenario_path("paper_example").read_text())


@pytest.fixture
def write_scenario(tmp_path):
    def write(doc, name="scenario"):
        path = tmp_path / "{}.json".format(name)
        path.write_text(json.dumps(doc))
        return str(path)

    return write


class TestVerify:
    def test_worked_example(self, scenario_path, capsys):
        assert main(["verify", str(scenario_path("paper_example"))]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["passed"] and document["mode"] == "exact"
        assert document["initial_box"] is True
        assert document["best"]["upper"]["gain_index"] == 1
        third = document["gains"]["upper"][2]["certificate"]
        np.testing.assert_allclose(third["v"], [1.0, 2.36, 0.45], rtol=1e-12)

    def test_metzler_violation(self, example_doc, write_scenario, capsys):
        example_doc["gains"]["upper"][2][2][0] = -0.5
        assert main(["verify", write_scenario(example_doc)]) == 1
        captured = capsys.readouterr()
        assert "upper[3] (3,1)" in captured.err
        assert json.loads(captured.out)["passed"] is False

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        assert main(["verify", str(path)]) == 2
        assert "broken.json:1:3" in capsys.readouterr().err

    def test_schema_error(self, example_doc, write_scenario, capsys):
        del example_doc["A"]
        assert main(["verify", write_scenario(example_doc)]) == 2
        assert ":A: missing key" in capsys.readouterr().err

    def test_box_violation(self, example_doc, write_scenario, capsys):
        example_doc["init"]["xbar0"][0] = 1.0
        assert main(["verify", write_scenario(example_doc)]) == 1
        assert "xlower0 <= x0 <= xbar0" in capsys.readouterr().err


class TestSimulate:
    def test_worked_example(self, scenario_path, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            ["simulate", str(scenario_path("paper_example")), "--out", str(out), "--t-end", "1", "--dt", "0.01", "--oracle"]
        )
        assert code == 0

        frame = pd.read_csv(out / "trajectory.csv")
        assert len(frame.columns) == 16
        assert len(frame) == 11
        assert frame["t"].iloc[-1] == pytest.approx(1.0)

        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["status"] == "Completed"
        assert metrics["t_escape"] is None
        assert metrics["metrics"]["max_framer_violation"] <= 1e-9
        assert metrics["oracle_deviation"] < 1e-6
        assert metrics["diagnostics"]["steps"] == 100
        assert (out / "error_oracle.csv").exists()
        assert "written to" in capsys.readouterr().out

    def test_finite_escape(self, scenario_path, tmp_path):
        out = tmp_path / "escape"
        assert main(["simulate", str(scenario_path("finite_escape")), "--out", str(out)]) == 1
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["status"] == "Diverged"
        assert metrics["t_escape"] == pytest.approx(1.0, abs=0.01)
        assert (out / "trajectory.csv").exists()

    def test_failed_gains(self, example_doc, write_scenario, tmp_path, capsys):
        example_doc["gains"]["lower"][0][2][0] = -1.0
        path = write_scenario(example_doc)
        assert main(["simulate", path, "--out", str(tmp_path / "a"), "--t-end", "0.1", "--dt", "0.01"]) == 1
        assert "--force" in capsys.readouterr().err
        assert not (tmp_path / "a").exists()

    def test_forced(self, example_doc, write_scenario, tmp_path):
        example_doc["gains"]["lower"][0][2][0] = -1.0
        path = write_scenario(example_doc)
        with pytest.warns(UserWarning):
            code = main(["simulate", path, "--out", str(tmp_path / "b"), "--t-end", "0.1", "--dt", "0.01", "--force"])
        assert code in (0, 1)
        assert (tmp_path / "b" / "metrics.json").exists()

    def test_invalid_override(self, scenario_path, tmp_path):
        path = str(scenario_path("paper_example"))
        assert main(["simulate", path, "--out", str(tmp_path / "c"), "--dt", "-1"]) == 2

    def test_oracle_skipped_for_transform(self, example_doc, write_scenario, tmp_path, capsys):
        example_doc["transform"] = np.eye(3).tolist()
        path = write_scenario(example_doc)
        assert main(["simulate", path, "--out", str(tmp_path / "d"), "--t-end", "0.1", "--dt", "0.01", "--oracle"]) == 0
        assert json.loads((tmp_path / "d" / "metrics.json").read_text())["oracle_deviation"] is None
        assert "untransformed" in capsys.readouterr().err


class TestCompare:
    def test_worked_example(self, scenario_path, tmp_path):
        out = tmp_path / "cmp"
        code = main(
            ["compare", str(scenario_path("paper_example")), "--out", str(out), "--t-end", "1", "--dt", "0.01", "--sequential"]
        )
        assert code == 0

        result = json.loads((out / "comparison.json").read_text())
        assert result["phi"] == 3 and result["passed"]
        assert set(result["margins"]) == {"single1", "single2", "single3"}
        assert result["dominance_margin"] >= -1e-6
        assert result["intersection_margin"] >= -1e-6

        frame = pd.read_csv(out / "comparison.csv")
        assert "width_multi_1" in frame.columns and "width_intersection_3" in frame.columns

    def test_single_gain_is_usage_error(self, example_doc, write_scenario, tmp_path):
        example_doc["gains"] = {"upper": [G1.tolist()], "lower": [G1.tolist()]}
        assert main(["compare", write_scenario(example_doc), "--out", str(tmp_path / "e")]) == 2

    def test_duplicated_gain(self, example_doc, write_scenario, tmp_path):
        example_doc["gains"] = {"upper": [G1.tolist(), G1.tolist()], "lower": [G1.tolist(), G1.tolist()]}
        out = tmp_path / "dup"
        code = main(["compare", write_scenario(example_doc), "--out", str(out), "--t-end", "1", "--dt", "0.01", "--sequential"])
        assert code == 0
        result = json.loads((out / "comparison.json").read_text())
        assert result["margins"]["single1"] == 0.0
        assert result["margins"]["single2"] == 0.0


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["--version"])
        assert err.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_out_required(self):
        with pytest.raises(SystemExit) as err:
            build_parser().parse_args(["simulate", "x.json"])
        assert err.value.code == 2

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])
