import json
import xml.etree.ElementTree as ET

import jsonschema
import numpy as np
import pytest

from stockcast import report as R
from stockcast.data import make_weeks, synthesize
from stockcast.walk_forward import DAY_LABELS, EvalReport, RoundResult, run_rounds


@pytest.fixture(scope="module")
def rep():
    s = synthesize(days=110)
    return run_rounds("cnn1", s[:80], make_weeks(s[80:]), n_rounds=3, train_overrides=dict(epochs=2))


def test_text_header_and_rows(rep):
    text = R.render_text(rep)
    lines = text.splitlines()
    header = next(l for l in lines if l.startswith("No."))
    assert header.split() == ["No.", "RMSE", *DAY_LABELS, "Time"]
    for name in ("Mean", "Min", "Max", "SD", "RMSE/Mean"):
        assert any(l.startswith(name) for l in lines)
    row1 = next(l for l in lines if l.startswith("1 "))
    assert row1.split()[1] == f"{rep.rounds[0].rmse:.2f}"


def test_json_matches_schema(rep):
    doc = json.loads(R.render_report(rep, "json"))
    jsonschema.validate(doc, R.schema())
    assert doc["kind"] == "cnn1"
    assert len(doc["rounds"]) == 3
    assert "seconds" not in json.dumps(doc)


def test_json_round_trip(rep):
    doc = json.loads(R.render_report(rep, "json"))
    back = R.from_dict(doc, R.timing_dict(rep))
    for name, values in rep.aggregates().items():
        np.testing.assert_allclose(back.aggregates()[name], values)
    assert R.render_text(back) == R.render_text(rep)
    assert R.render_report(back, "json") == R.render_report(rep, "json")


def test_from_dict_rejects_other_documents():
    with pytest.raises(ValueError):
        R.from_dict({"schema": "something/else"})


def test_csv_rows(rep):
    rows = R.render_csv(rep).splitlines()
    assert rows[0] == "row,seed,RMSE,Mon,Tue,Wed,Thu,Fri,error"
    assert [r.split(",")[0] for r in rows[1:]] == ["1", "2", "3", "Mean", "Min", "Max", "SD", "RMSE/Mean"]
    assert float(rows[1].split(",")[2]) == rep.rounds[0].rmse


def test_svg_well_formed_with_day_labels(rep):
    svg = R.render_report(rep, "svg")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    text = svg.decode()
    for d in DAY_LABELS:
        assert d in text
    assert R.render_report(rep, "svg") == svg
    ET.fromstring(R.render_forecast_svg(rep))


def test_partial_report_renders_and_validates():
    ok = RoundResult(1, 0, 2.0, [1, 2, 2, 2, 3], 0.5, [[0.0] * 5])
    bad = RoundResult(2, 1, error="NonFiniteError: loss")
    meta = {
        "kind": "cnn1",
        "overrides": {},
        "train_config": {},
        "scaler": "none",
        "retrain_policy": "none",
        "stride": 1,
        "n_rounds": 2,
        "base_seed": 0,
    }
    rep = EvalReport("cnn1", [ok, bad], 100.0, meta, [[1.0] * 5], ["2020-01-06"])
    assert rep.partial
    assert "failed" in R.render_text(rep)
    doc = json.loads(R.render_report(rep, "json"))
    jsonschema.validate(doc, R.schema())
    assert doc["partial"] is True and doc["rounds"][1]["rmse"] is None
    assert R.render_csv(rep).splitlines()[2].endswith("NonFiniteError: loss")


def test_unknown_format(rep):
    with pytest.raises(ValueError, match="unknown report format"):
        R.render_report(rep, "xlsx")
