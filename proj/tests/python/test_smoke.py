# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The cwalk Authors

import math
import os
import shutil
from pathlib import Path

import pytest

import cwalk

FIXTURES = Path(os.environ.get("CWALK_FIXTURES", Path(__file__).resolve().parents[2] / "fixtures"))
PROMPTS = Path(os.environ.get("CWALK_PROMPTS", Path(__file__).resolve().parents[2] / "prompts"))
APP = FIXTURES / "recipe_app" / "app.json"
TS = "2026-01-01T00:00:00Z"


def test_graph_loads_and_validates():
    graph = cwalk.load_app_graph(str(APP))
    assert {t["id"] for t in graph["tasks"]} >= {"find_recipe", "view_favorites"}
    assert cwalk.validate_manifest(str(APP)) == []


def test_errors_carry_codes(tmp_path):
    with pytest.raises(cwalk.CwalkError) as info:
        cwalk.parse_evaluator_response("no json here")
    assert info.value.code == "NoJsonFound"
    bad = tmp_path / "app.json"
    bad.write_text("{ nope")
    with pytest.raises(cwalk.CwalkError) as info:
        cwalk.load_app_graph(str(bad))
    assert info.value.code == "ManifestSyntax"


def test_parse_response_and_collapse():
    raw = """Sure:
```json
{"current_state": "home", "possible_actions": [{"action": "tap search", "rationale": "find it",
 "confidence": "High"}], "next_action": "tap search", "next_action_rationale": "find it",
 "confusing_or_not": "Slightly confusing", "confusing_or_not_rationale": "busy"}
```"""
    r = cwalk.parse_evaluator_response(raw, with_confusion=True)
    assert r["next_action"] == "tap search"
    assert r["possible_actions"][0]["confidence"] == "high"
    assert cwalk.collapse_rating("slightly") == "confusing"
    assert cwalk.collapse_rating("not_at_all") == "not_confusing"


def test_metric_primitives():
    p = cwalk.path_distribution([["A", "B", "C"]])
    q = cwalk.path_distribution([["A", "B", "D"]])
    assert p == {("A", "B"): 0.5, ("B", "C"): 0.5}
    expected = 0.5 * (0.5 * math.log2(0.5 / 0.25) * 2)  # shared edge contributes zero
    assert cwalk.js_divergence(p, q) == pytest.approx(expected)
    assert cwalk.js_divergence(p, p) == 0.0
    assert cwalk.cohens_kappa(["confusing", "not_confusing"], ["confusing", "not_confusing"]) == 1.0
    assert cwalk.cohens_kappa(["confusing"] * 3, ["confusing"] * 3) is None
    assert cwalk.corrected_odds_ratio(1, 5, 0, 18) == pytest.approx(111 / 11)


def test_replayed_walk_matches_recording(tmp_path):
    rec = FIXTURES / "recordings" / "recipe_b.jsonl"
    first = cwalk.walk(str(APP), f"replay:{rec}", str(tmp_path / "a"), "py", with_confusion=True, timestamp=TS,
                       label="gpt-sim", prompts_dir=str(PROMPTS))
    second = cwalk.walk(str(APP), f"replay:{rec}", str(tmp_path / "b"), "py", with_confusion=True, timestamp=TS,
                        label="gpt-sim", prompts_dir=str(PROMPTS))
    assert first["sessions"]
    for x, y in zip(first["sessions"], second["sessions"]):
        assert Path(x["trace_file"]).read_text() == Path(y["trace_file"]).read_text()


def test_ratings_and_report_match_golden(tmp_path):
    ratings = cwalk.rate_screens(str(APP), str(FIXTURES / "screens.jsonl"), f"scripted:{FIXTURES / 'scripts' / 'rater.json'}",
                                 str(tmp_path / "ratings" / "wc.ratings.jsonl"), "rate", jobs=2, label="rater",
                                 timestamp=TS, prompts_dir=str(PROMPTS))
    assert ratings
    golden = FIXTURES / "golden"
    assert (tmp_path / "ratings" / "wc.ratings.jsonl").read_text() == (golden / "wc.ratings.jsonl").read_text()

    traces = tmp_path / "traces"
    for x in "abc":
        cwalk.walk(str(APP), f"scripted:{FIXTURES / 'scripts' / f'evaluator_{x}.json'}", str(traces), f"g{x}",
                   with_confusion=True, label=f"scripted-{x}", timestamp=TS, prompts_dir=str(PROMPTS))
    for f in (FIXTURES / "human").glob("*.trace.jsonl"):
        shutil.copy(f, traces)
    out = cwalk.metrics(str(traces), str(tmp_path / "report"), ratings=str(tmp_path / "ratings"),
                        human_labels=str(FIXTURES / "human_labels.jsonl"), manifest=str(APP))
    assert out["issues"] == []
    assert Path(out["csv"]).read_text() == (golden / "metrics.csv").read_text()
    assert Path(out["summary"]).read_text() == (golden / "summary.md").read_text()
