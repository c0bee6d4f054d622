import json

import pytest

from proactive.core.types import Unit, parse_trace, serialize_trace
from proactive.errors import MissingFixture, ParseError
from proactive.scenario import (
    BUNDLED,
    compare_trace,
    dump_scenario,
    load_scenario,
    parse_scenario,
    replay,
)


def minimal(tmp_path, events):
    for name in ("prompts.json", "models.json", "search.json"):
        (tmp_path / name).write_text("{}")
    return {
        "name": "tiny",
        "events": events,
        "prompt_pack": "prompts.json",
        "model_fixtures": "models.json",
        "search_fixtures": "search.json",
    }


class TestLoad:
    def test_blackjack_shape(self):
        scenario = load_scenario("blackjack")
        assert len(scenario.events) >= 30
        counts = []
        for e in scenario.events:
            n = sum(ch.isdigit() and (i == 0 or not e.payload[i - 1].isdigit()) for i, ch in enumerate(e.payload))
            if not counts or counts[-1][1] != n:
                counts.append((e.t, n))
        # four planted change points after the opening frames with no cards showing
        assert [t for t, _ in counts[1:]] == [8, 13, 21, 27]

    def test_out_of_order(self, tmp_path):
        data = minimal(tmp_path, [
            {"t": 1, "kind": "Tick"}, {"t": 3, "kind": "Tick"}, {"t": 2, "kind": "Tick"},
        ])
        with pytest.raises(ParseError, match=r"events\[2\]"):
            parse_scenario(data, tmp_path / "s.json")

    def test_missing_fixture(self, tmp_path):
        data = minimal(tmp_path, [])
        data["model_fixtures"] = "absent.json"
        with pytest.raises(MissingFixture):
            parse_scenario(data, tmp_path / "s.json")

    def test_empty_payload(self, tmp_path):
        data = minimal(tmp_path, [{"t": 0, "kind": "FrameDescription", "payload": ""}])
        with pytest.raises(ParseError, match=r"events\[0\]"):
            parse_scenario(data, tmp_path / "s.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text("{nope")
        with pytest.raises(ParseError):
            load_scenario(path)

    def test_unknown_field(self, tmp_path):
        data = minimal(tmp_path, [])
        data["colour"] = "blue"
        with pytest.raises(ParseError):
            parse_scenario(data, tmp_path / "s.json")

    def test_dump_round_trip(self, tmp_path):
        scenario = load_scenario("retail")
        out = tmp_path / "scenario.json"
        dump_scenario(scenario, out)
        again = json.loads(out.read_text())
        assert again["events"] == json.loads(scenario.path.read_text())["events"]


class TestReplay:
    def test_museum(self):
        trace = replay(load_scenario("museum"))
        assert trace.trigger_times == [15] and trace.services == ["Guided Tour Explanation"]

    def test_retail(self):
        trace = replay(load_scenario("retail"))
        assert trace.trigger_times == [18] and trace.services == ["Fit Advisor"]

    @pytest.mark.parametrize("name", BUNDLED)
    def test_matches_golden(self, name):
        scenario = load_scenario(name)
        report = compare_trace(replay(scenario), scenario.resolve(scenario.expected))
        assert report.ok, report.render()


class TestCompare:
    def golden(self, tmp_path):
        scenario = load_scenario("museum")
        text = replay(scenario).serialize()
        path = tmp_path / "golden.jsonl"
        path.write_text(text)
        return text, path

    def test_identical(self, tmp_path):
        text, path = self.golden(tmp_path)
        report = compare_trace(text, path)
        assert report.ok and report.differences == [] and report.exit_status == 0

    def test_changed_service(self, tmp_path):
        text, path = self.golden(tmp_path)
        entries = parse_trace(text)
        i = next(i for i, e in enumerate(entries) if e.unit is Unit.CPU and e.label == "proposal")
        entries[i] = entries[i].__class__(entries[i].t, entries[i].seq, Unit.CPU, "proposal", "Something Else")
        report = compare_trace(serialize_trace(entries), path)
        assert report.exit_status == 1
        assert report.differences == [
            f"changed entry (t=15.0, seq={entries[i].seq}) body: expected 'Guided Tour Explanation', got 'Something Else'"
        ]

    def test_golden_has_extra_entry(self, tmp_path):
        text, path = self.golden(tmp_path)
        shorter = serialize_trace(parse_trace(text)[:-1])
        report = compare_trace(shorter, path)
        assert len(report.differences) == 1 and report.differences[0].startswith("missing entry")

    def test_unreadable_golden(self, tmp_path):
        path = tmp_path / "golden.jsonl"
        path.write_text("not json\n")
        with pytest.raises(ParseError):
            compare_trace("", path)
