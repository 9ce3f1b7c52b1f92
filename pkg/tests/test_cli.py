"""End-to-end command-line runs against real files in a temp directory."""

import json
import os

import pytest

from conftest import build_model, build_truth, invalid_model_cases, nominal_state
from bowtie_risk import (
    Episode,
    EpisodeLog,
    Node,
    ViolationCode,
    load_log,
    load_model,
    save_log,
    save_model,
    save_state_trace,
    save_truth,
)
from bowtie_risk.cli import EXIT_DOMAIN, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def model_file(model, tmp_path):
    path = str(tmp_path / "model.json")
    save_model(model, path)
    return path


@pytest.fixture
def truth_file(truth, tmp_path):
    path = str(tmp_path / "truth.json")
    save_truth(truth, path)
    return path


def write_scene(tmp_path, body=None):
    text = body or (
        "scene s {\n"
        "    type int\n"
        "    entity uniform { low: int  high: int }\n"
        "    entity w { c: uniform }\n"
        "    instance { w.c = uniform(low=0, high=100) }\n"
        "}\n"
    )
    path = tmp_path / "scene.sdl"
    path.write_text(text)
    return str(path)


class TestValidateCommand:
    def test_valid_model(self, model_file, capsys):
        assert main(["validate", model_file]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("OK:")

    def test_single_violation_prints_one_line(self, tmp_path, capsys):
        mutant, expected = invalid_model_cases()["second_top"]
        path = str(tmp_path / "bad.json")
        save_model(mutant, path)
        assert main(["validate", path]) == EXIT_DOMAIN
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1
        assert "TOP_COUNT" in lines[0]

    def test_delimited_output_is_machine_readable(self, tmp_path, capsys):
        mutant, expected = invalid_model_cases()["cycle_back_edge"]
        path = str(tmp_path / "bad.json")
        save_model(mutant, path)
        assert main(["validate", path, "--format", "delimited"]) == EXIT_DOMAIN
        rows = [line.split("\t") for line in capsys.readouterr().out.strip().splitlines()]
        assert {row[0] for row in rows} == {c.value for c in expected}
        assert all(len(row) == 3 for row in rows)

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_INPUT

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{oops")
        assert main(["validate", str(path)]) == EXIT_INPUT


class TestSampleCommand:
    def test_stdout_jsonl_and_determinism(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        assert main(["sample", scene, "--count", "3", "--seed", "9"]) == EXIT_OK
        first = capsys.readouterr().out
        rows = [json.loads(line) for line in first.strip().splitlines()]
        assert len(rows) == 3
        assert all(0 <= r["values"]["w.c"] <= 100 for r in rows)
        assert main(["sample", scene, "--count", "3", "--seed", "9"]) == EXIT_OK
        assert capsys.readouterr().out == first

    def test_out_file(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        out = str(tmp_path / "configs.jsonl")
        assert main(["sample", scene, "--count", "2", "--seed", "1", "--out", out]) == EXIT_OK
        assert len(open(out).read().strip().splitlines()) == 2

    def test_out_dir_env_redirects_relative_paths(self, tmp_path, monkeypatch, capsys):
        scene = write_scene(tmp_path)
        monkeypatch.setenv("BOWTIE_RISK_OUT_DIR", str(tmp_path / "outputs"))
        monkeypatch.chdir(tmp_path)
        assert main(["sample", scene, "--count", "1", "--seed", "1", "--out", "c.jsonl"]) == EXIT_OK
        assert (tmp_path / "outputs" / "c.jsonl").exists()

    def test_seed_is_required(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        assert main(["sample", scene, "--count", "1"]) == EXIT_USAGE

    def test_parse_error_is_input_error(self, tmp_path, capsys):
        path = tmp_path / "scene.sdl"
        path.write_text("scene s {")
        assert main(["sample", str(path), "--seed", "0"]) == EXIT_INPUT

    def test_unsamplable_scene_is_domain_error(self, tmp_path, capsys):
        scene = write_scene(
            tmp_path,
            "scene s {\n"
            "    type int\n"
            "    entity uniform { low: int  high: int }\n"
            "    entity w { c: uniform }\n"
            "}\n",
        )
        assert main(["sample", scene, "--seed", "0"]) == EXIT_DOMAIN


class TestSimulateCommand:
    def test_writes_episode_log(self, truth_file, model_file, tmp_path, capsys):
        out = str(tmp_path / "log.jsonl")
        code = main(
            ["simulate", truth_file, model_file, "--episodes", "50", "--seed", "3", "--out", out]
        )
        assert code == EXIT_OK
        log = load_log(out)
        assert len(log) == 50
        assert log.isolated_threat is None
        text = capsys.readouterr().out
        assert "50 episode(s)" in text
        assert "top events:" in text

    def test_isolation_flag(self, truth_file, model_file, tmp_path, capsys):
        out = str(tmp_path / "log.jsonl")
        code = main(
            [
                "simulate", truth_file, model_file,
                "--episodes", "10", "--seed", "3", "--isolate", "T1", "--out", out,
            ]
        )
        assert code == EXIT_OK
        assert load_log(out).isolated_threat == "T1"

    def test_unknown_isolation_target(self, truth_file, model_file, tmp_path, capsys):
        out = str(tmp_path / "log.jsonl")
        code = main(
            [
                "simulate", truth_file, model_file,
                "--episodes", "10", "--seed", "3", "--isolate", "T9", "--out", out,
            ]
        )
        assert code == EXIT_DOMAIN
        assert not os.path.exists(out)

    def test_invalid_model_is_rejected(self, truth_file, tmp_path, capsys):
        mutant, _ = invalid_model_cases()["cycle_back_edge"]
        bad = str(tmp_path / "bad.json")
        save_model(mutant, bad)
        out = str(tmp_path / "log.jsonl")
        code = main(
            ["simulate", truth_file, bad, "--episodes", "5", "--seed", "0", "--out", out]
        )
        assert code == EXIT_DOMAIN
        assert "fails validation" in capsys.readouterr().err


class TestFitCommand:
    def _files(self, tmp_path, episodes=300):
        from bowtie_risk import run_episodes

        base = build_model()
        nodes = tuple(
            Node(
                id=n.id,
                node_type=n.node_type,
                event_role=n.event_role,
                severity=n.severity,
                conditional_function=(
                    None if n.id in ("B1", "T1") else n.conditional_function
                ),
            )
            for n in base.nodes
        )
        unfitted = build_model(nodes=nodes)
        model_path = str(tmp_path / "unfitted.json")
        save_model(unfitted, model_path)
        truth = build_truth(occurrence_model="once_per_scene")
        log = run_episodes(truth, base, count=episodes, seed=21, isolate="T1")
        log_path = str(tmp_path / "log.jsonl")
        save_log(log, log_path)
        return model_path, log_path

    def test_fits_missing_functions(self, tmp_path, capsys):
        model_path, log_path = self._files(tmp_path)
        out = str(tmp_path / "fitted.json")
        code = main(
            [
                "fit", "--model", model_path, "--log", log_path, "--out", out,
                "--factors", "B1=fault.camera_blur",
            ]
        )
        assert code == EXIT_OK
        fitted = load_model(out)
        b1 = fitted.node("B1").conditional_function
        assert b1 is not None
        assert [f.variable for f in b1.factors] == ["fault.camera_blur"]
        t1 = fitted.node("T1").conditional_function
        assert t1 is not None
        assert t1.base == pytest.approx(1.0)  # one occurrence per 1-minute episode
        text = capsys.readouterr().out
        assert "fitted B1" in text and "fitted T1" in text

    def test_empty_log_surfaces_degenerate_data(self, tmp_path, capsys):
        model_path, _ = self._files(tmp_path)
        log = EpisodeLog(
            episodes=(
                Episode(
                    scene_id="a",
                    duration=1.0,
                    state=nominal_state(),
                    threat_occurrences={"T1": 0},
                ),
            ),
            isolated_threat="T1",
        )
        log_path = str(tmp_path / "empty.jsonl")
        save_log(log, log_path)
        out = str(tmp_path / "fitted.json")
        code = main(["fit", "--model", model_path, "--log", log_path, "--out", out])
        assert code == EXIT_DOMAIN
        assert "B1" in capsys.readouterr().err
        assert not os.path.exists(out)

    def test_factor_spec_for_unknown_node_is_usage_error(self, tmp_path, capsys):
        model_path, log_path = self._files(tmp_path)
        out = str(tmp_path / "fitted.json")
        code = main(
            [
                "fit", "--model", model_path, "--log", log_path, "--out", out,
                "--factors", "B9=fault.radar",
            ]
        )
        assert code == EXIT_USAGE

    def test_structurally_broken_model_is_rejected(self, tmp_path, capsys):
        mutant, _ = invalid_model_cases()["cycle_back_edge"]
        bad = str(tmp_path / "bad.json")
        save_model(mutant, bad)
        _, log_path = self._files(tmp_path)
        out = str(tmp_path / "fitted.json")
        code = main(["fit", "--model", bad, "--log", log_path, "--out", out])
        assert code == EXIT_DOMAIN


class TestAssessCommand:
    def _trace(self, model, tmp_path, rows):
        path = str(tmp_path / "trace.csv")
        save_state_trace(rows, [v.name for v in model.state_schema], path)
        return path

    def test_clean_trace(self, model, model_file, tmp_path, capsys):
        trace = self._trace(model, tmp_path, [(float(t), nominal_state()) for t in range(4)])
        out = str(tmp_path / "risk.csv")
        code = main(["assess", "--model", model_file, "--trace", trace, "--out", out])
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "no violations" in text
        header = open(out).readline().strip()
        assert header == "timestamp,consequence,raw_rate,smoothed_rate,likelihood,verdict"

    def test_violations_reported_but_exit_zero(self, model, model_file, tmp_path, capsys):
        degraded = nominal_state()
        degraded["fault.radar"] = "1"
        trace = self._trace(model, tmp_path, [(float(t), degraded) for t in range(3)])
        code = main(["assess", "--model", model_file, "--trace", trace, "--window", "1"])
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "violation at t=0" in text

    def test_missing_variable_column_is_domain_error(self, model, model_file, tmp_path, capsys):
        path = tmp_path / "trace.csv"
        path.write_text("timestamp,fault.radar\n0.0,0\n")
        code = main(["assess", "--model", model_file, "--trace", str(path)])
        assert code == EXIT_DOMAIN
        assert "fault.camera_blur" in capsys.readouterr().err

    def test_invalid_model_is_rejected(self, tmp_path, model, capsys):
        mutant, _ = invalid_model_cases()["second_top"]
        bad = str(tmp_path / "bad.json")
        save_model(mutant, bad)
        trace = self._trace(model, tmp_path, [(0.0, nominal_state())])
        assert main(["assess", "--model", bad, "--trace", trace]) == EXIT_DOMAIN


class TestEvaluateCommand:
    def _points(self, tmp_path):
        path = tmp_path / "points.csv"
        path.write_text(
            "scene_id,estimated_rate,observed_count\n"
            "s0,0.0,0\ns1,1.0,1\ns2,2.0,2\ns3,3.0,3\n"
        )
        return str(path)

    def test_text_report(self, tmp_path, capsys):
        assert main(["evaluate", "--points", self._points(tmp_path)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "scenes: 4" in text
        assert "slope" in text

    def test_delimited_report(self, tmp_path, capsys):
        code = main(
            ["evaluate", "--points", self._points(tmp_path), "--format", "delimited"]
        )
        assert code == EXIT_OK
        rows = dict(
            (line.split("\t")[0], line.split("\t")[1:])
            for line in capsys.readouterr().out.strip().splitlines()
        )
        assert float(rows["fit_all"][0]) == pytest.approx(1.0)

    def test_missing_columns_is_input_error(self, tmp_path, capsys):
        path = tmp_path / "points.csv"
        path.write_text("scene_id\ns0\n")
        assert main(["evaluate", "--points", str(path)]) == EXIT_INPUT


class TestTopLevel:
    def test_no_arguments_shows_help(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "COMMAND" in capsys.readouterr().out

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_version_flag(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "bowtie-risk" in capsys.readouterr().out
