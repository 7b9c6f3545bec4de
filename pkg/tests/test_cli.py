"""Command line interface: subcommands, output shapes, exit codes."""

import json
import subprocess
import sys

import pytest

from voxhub.cli import main
from voxhub.harness import ScenarioScript
from voxhub.protocol import iter_frames


class TestChunkCommand:
    def test_prints_one_chunk_per_line(self, capsys):
        code = main(["chunk", "--text", "Hello there. How are you today? I am good thanks."])
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines == ["Hello there. How are you today?", "I am good thanks."]

    def test_respects_max_tokens(self, capsys):
        code = main(
            ["chunk", "--text", "one two three four five six", "--max-tokens", "3"]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines == ["one two three,", "four five six"]

    def test_invalid_bounds_exit_2(self, capsys):
        assert main(["chunk", "--text", "hi", "--max-tokens", "0"]) == 2
        assert "error:" in capsys.readouterr().err


class TestSweepCommand:
    def test_csv_on_stdout(self, capsys):
        code = main(["pipeline-sweep", "--rtf", "0.85", "--chunks", "3"])
        assert code == 0
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert lines[0].startswith("rtf,stt_ms,agent_ms")
        assert lines[1] == "0.85,800,100,3,2000,2600,0,true"

    def test_grid_size(self, capsys):
        code = main(
            ["pipeline-sweep", "--rtf", "0.5,1.0", "--chunks", "2,4", "--chunk-ms", "1000,2000"]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 1 + 2 * 2 * 2

    def test_bad_rtf_list_exit_2(self, capsys):
        assert main(["pipeline-sweep", "--rtf", "fast"]) == 2
        assert "error:" in capsys.readouterr().err


class TestSimulateCommand:
    def test_builtin_scenarios_pass(self, capsys):
        assert main(["simulate", "triage_red"]) == 0
        assert "scenario triage_red: PASS" in capsys.readouterr().out
        assert main(["simulate", "anamnesis_full"]) == 0
        assert "scenario anamnesis_full: PASS" in capsys.readouterr().out

    def test_text_input_mode(self, capsys):
        assert main(["simulate", "triage_red", "--text-input"]) == 0

    def test_scenario_from_file(self, tmp_path, capsys):
        script = {
            "name": "quick",
            "agent_id": "anamnesis",
            "utterances": ["hello"],
            "expect": {},
        }
        path = tmp_path / "quick.json"
        path.write_text(json.dumps(script))
        assert main(["simulate", str(path)]) == 0
        assert "scenario quick: PASS" in capsys.readouterr().out

    def test_failed_expectation_exit_1(self, tmp_path, capsys):
        script = {
            "name": "wrong",
            "agent_id": "triage",
            "utterances": ["hello"],
            "expect": {"final_colour": "red"},
        }
        path = tmp_path / "wrong.json"
        path.write_text(json.dumps(script))
        assert main(["simulate", str(path)]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_scenario_exit_2(self, capsys):
        assert main(["simulate", "no_such_scenario"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_record_writes_framed_stream(self, tmp_path, capsys):
        out_path = tmp_path / "session.bin"
        assert main(["simulate", "triage_red", "--record", str(out_path)]) == 0
        kinds = {m.kind for m in iter_frames(out_path.read_bytes())}
        assert kinds == {
            "session_ack",
            "catalog",
            "transcript",
            "chunk_audio",
            "turn_end",
            "error",
        }

    def test_gateway_config_file(self, tmp_path, capsys):
        config = {"chunking": {"max_tokens": 6, "min_tokens": 2}}
        path = tmp_path / "gw.json"
        path.write_text(json.dumps(config))
        # masked flags in the bundled expectations assume max_tokens=12, so
        # use a scenario without them
        script = {"name": "cfg", "agent_id": "triage", "utterances": ["hello"]}
        scenario = tmp_path / "cfg.json"
        scenario.write_text(json.dumps(script))
        assert main(["simulate", str(scenario), "--config", str(path)]) == 0
        out = capsys.readouterr().out
        # greeting re-chunks under the tighter cap: 3 + 6-token sentences
        assert "agent[2]>" in out


class TestBenchCommand:
    def test_clean_run_exit_0(self, capsys):
        assert main(["bench", "--sessions", "5", "--turns", "2"]) == 0
        out = capsys.readouterr().out
        assert "sessions=5" in out
        assert "leaked_turns=0" in out

    def test_bad_session_count_exit_2(self, capsys):
        assert main(["bench", "--sessions", "0"]) == 2


class TestArgumentHandling:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["dance"])
        assert exc.value.code == 2

    def test_console_entry_point(self):
        result = subprocess.run(
            [sys.executable, "-m", "voxhub.cli", "chunk", "--text", "Short one."],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert result.returncode == 0
        assert result.stdout.strip() == "Short one."


class TestScriptExpectationsMatchBundledFiles:
    def test_bundled_masked_flags_hold(self):
        # The bundled expectations pin per-turn masking; simulate() checks
        # them, so a drift in chunking or latency defaults fails loudly.
        from voxhub.scenarios import builtin_scenario_text

        for name in ("triage_red", "anamnesis_full"):
            script = ScenarioScript.from_dict(json.loads(builtin_scenario_text(name)))
            assert script.expect.masked is not None
