import json
import os
import subprocess
import sys

import pytest

import minia
from minia import primitives
from minia.cli import main
from minia.study import (
    Scheduler,
    TrialResponse,
    append_response,
    generate_plan,
    load_plan,
    save_plan,
)

from conftest import write_dataset


@pytest.fixture
def dataset(tmp_path):
    specs = {
        "figA": (0, {"alpha": primitives.l_plate(0.4), "beta": primitives.box((4, 3, 0.4))}),
        "figB": (2, {"alpha": primitives.box((2, 5, 0.3)), "beta": primitives.l_plate(0.5)}),
    }
    return write_dataset(str(tmp_path / "ds"), specs)


def test_eval_then_table(dataset, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["eval", "--manifest", dataset, "--out", str(out)]) == 0
    assert out.exists()
    capsys.readouterr()

    assert main(["table", "--report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "alpha" in text and "beta" in text
    assert "IoU↑" in text

    assert main(["table", "--report", str(out), "--format", "csv"]) == 0
    csv_text = capsys.readouterr().out
    assert csv_text.startswith("method,figures,")


def test_eval_reports_errors_with_exit_1(dataset, tmp_path, capsys):
    manifest = json.loads(open(dataset).read())
    base = os.path.dirname(dataset)
    with open(os.path.join(base, "junk.obj"), "w") as fh:
        fh.write("f 1 2 3\n")
    manifest["figures"][0]["meshes"]["gamma"] = "junk.obj"
    with open(dataset, "w") as fh:
        json.dump(manifest, fh)

    out = tmp_path / "report.json"
    assert main(["eval", "--manifest", dataset, "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "figA/gamma" in err
    assert "MalformedFile" in err
    body = json.loads(out.read_text())["report"]
    assert len(body["errors"]) == 1
    assert len(body["records"]) == 4  # the rest of the batch still ran


def test_fatal_errors_exit_2(tmp_path, capsys):
    assert main(["eval", "--manifest", str(tmp_path / "ghost.json"),
                 "--out", str(tmp_path / "r.json")]) == 2
    assert "fatal" in capsys.readouterr().err


def test_orient_debug_dumps_candidates(dataset, tmp_path, capsys):
    out = tmp_path / "debug"
    code = main([
        "orient-debug", "--manifest", dataset,
        "--figure", "figA", "--method", "alpha", "--out", str(out),
    ])
    assert code == 0
    files = sorted(os.listdir(out))
    assert "reference.png" in files
    assert "orientation.json" in files
    assert sum(f.startswith("candidate_") for f in files) == 16

    summary = json.loads((out / "orientation.json").read_text())
    assert summary["figure_id"] == "figA"
    assert len(summary["candidates"]) == 16
    assert summary["winner_index"] in range(16)
    ious = [c["iou"] for c in summary["candidates"]]
    assert max(ious) <= 1.0
    eligible = set(summary["eligible"])
    for cand in summary["candidates"]:
        if cand["index"] in eligible:
            assert cand["clip_similarity"] is not None
        else:
            assert cand["clip_similarity"] is None
    assert "winner" in capsys.readouterr().out


def test_orient_debug_unknown_figure(dataset, tmp_path, capsys):
    code = main([
        "orient-debug", "--manifest", dataset,
        "--figure", "nope", "--method", "alpha", "--out", str(tmp_path / "x"),
    ])
    assert code == 2


def test_study_plan_builds_assets(dataset, tmp_path, capsys):
    plan_path = tmp_path / "plan.json"
    assets = tmp_path / "assets"
    code = main([
        "study", "plan", "--manifest", dataset,
        "--out-plan", str(plan_path), "--assets", str(assets),
        "--repetitions", "30", "--seed", "3",
    ])
    assert code == 0
    plan = load_plan(plan_path)
    assert len(plan) == 30
    pngs = [f for f in os.listdir(assets) if f.endswith(".png")]
    # 2 references + 2 figures x 2 methods winner renders
    assert len(pngs) == 6


def test_study_analyze_text_and_json(tmp_path, capsys):
    plan = generate_plan(["f1", "f2"], ["alpha", "beta"])
    plan_path = tmp_path / "plan.json"
    save_plan(plan, plan_path)
    log_path = tmp_path / "log.ndjson"

    sched = Scheduler(plan)
    for p in ("p1", "p2", "p3"):
        while (issued := sched.next_trial(p)) is not None:
            # alpha always wins
            choice = "left" if issued.left_method == "alpha" else "right"
            resp = TrialResponse(issued.trial_id, p, issued.left_method,
                                 issued.right_method, choice)
            append_response(log_path, resp)
            sched.record(resp)

    assert main(["study", "analyze", "--plan", str(plan_path),
                 "--log", str(log_path)]) == 0
    text = capsys.readouterr().out
    assert "alpha" in text
    assert "100.0" in text  # alpha's win percentage
    assert "concordance[pooled]" in text
    assert "chi-squared approximation" in text

    datasets = tmp_path / "datasets.json"
    datasets.write_text(json.dumps({"f1": "setA", "f2": "setB"}))
    assert main(["study", "analyze", "--plan", str(plan_path),
                 "--log", str(log_path), "--format", "json",
                 "--datasets", str(datasets)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["win_table"]["alpha"]["win_pct"] == 1.0
    assert payload["win_table"]["beta"]["wins"] == 0
    assert set(payload["concordance"]) == {"pooled", "setA", "setB"}
    assert payload["concordance"]["pooled"]["w"] == pytest.approx(1.0)
    assert payload["responses"] == 6


def test_console_entry_point(dataset, tmp_path):
    out = tmp_path / "report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "minia.cli", "eval",
         "--manifest", dataset, "--out", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
