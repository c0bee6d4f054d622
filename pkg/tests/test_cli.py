import json
import shutil

import pytest

from proactive.cli import main
from proactive.core.types import parse_trace
from proactive.scenario import bundled_path, load_scenario


@pytest.fixture
def museum_copy(tmp_path):
    src = bundled_path("museum").parent
    dst = tmp_path / "museum"
    shutil.copytree(src, dst)
    shutil.copy(src.parent / "prompts.json", tmp_path / "prompts.json")
    return dst / "scenario.json"


def test_run_to_stdout(capsys):
    assert main(["run", "retail"]) == 0
    entries = parse_trace(capsys.readouterr().out)
    assert [e.t for e in entries if e.label == "trigger"] == [18]


def test_run_trace_out(tmp_path):
    out = tmp_path / "trace.jsonl"
    assert main(["run", "museum", "--trace-out", str(out)]) == 0
    assert out.read_text() == load_scenario("museum").resolve("golden.jsonl").read_text()


def test_compare_ok(capsys):
    assert main(["compare", "blackjack"]) == 0
    assert "traces identical" in capsys.readouterr().out


def test_compare_detects_drift(capsys):
    # a longer cooldown swallows the 13s trigger, so the trace no longer matches
    assert main(["compare", "blackjack", "--cooldown", "6"]) == 1
    assert "changed entry" in capsys.readouterr().out


def test_record_golden(museum_copy, capsys):
    golden = museum_copy.parent / "golden.jsonl"
    golden.write_text("")
    assert main(["record-golden", str(museum_copy)]) == 0
    assert main(["compare", str(museum_copy)]) == 0


def test_validate_fixtures_ok(capsys):
    assert main(["validate-fixtures", "blackjack"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_validate_fixtures_reports_misses(museum_copy, capsys):
    models = museum_copy.parent / "models.json"
    data = json.loads(models.read_text())
    data.pop("output.condense")
    models.write_text(json.dumps(data))
    assert main(["validate-fixtures", str(museum_copy)]) == 1
    assert "fixture miss" in capsys.readouterr().out


def test_flags_override_config(tmp_path, capsys):
    sink = tmp_path / "spoken.log"
    assert main(["run", "blackjack", "--sink-path", str(sink), "--verbosity", "Full"]) == 0
    lines = sink.read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("[8.000] Hand: 6 points")


def test_session_failure_exit_code(museum_copy, capsys):
    models = museum_copy.parent / "models.json"
    data = json.loads(models.read_text())
    data.pop("cpu.classify")
    models.write_text(json.dumps(data))
    assert main(["run", str(museum_copy)]) == 2
    assert "session failed" in capsys.readouterr().err


def test_missing_scenario(capsys):
    assert main(["run", "no-such-scenario.json"]) == 2
    assert "error:" in capsys.readouterr().err
