import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

import minia
from minia.study import Scheduler, generate_plan, read_log
from minia.study_service import (
    StudyService,
    asset_token,
    make_server,
    reference_token,
)

FIGS = ["fig1", "fig2"]
METHODS = ["alpha", "beta", "gamma"]


@pytest.fixture
def plan():
    return generate_plan(FIGS, METHODS)


@pytest.fixture
def server(plan, tmp_path):
    assets = tmp_path / "assets"
    assets.mkdir()
    for fig in FIGS:
        minia.save_png(
            np.zeros((8, 8, 4), dtype=np.uint8), assets / f"{reference_token(fig)}.png"
        )
        for m in METHODS:
            minia.save_png(
                np.zeros((8, 8, 3), dtype=np.uint8),
                assets / f"{asset_token(fig, m)}.png",
            )
    service = StudyService(plan, str(tmp_path / "log.ndjson"), assets_dir=str(assets))
    httpd = make_server(service, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}", service, tmp_path
    httpd.shutdown()
    httpd.server_close()


def _get(base, path):
    try:
        with urllib.request.urlopen(base + path, timeout=10) as resp:
            body = resp.read()
            return resp.status, json.loads(body) if body else None
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"null")


def _get_bytes(base, path):
    with urllib.request.urlopen(base + path, timeout=10) as resp:
        return resp.status, resp.headers.get("Content-Type"), resp.read()


def _post(base, path, payload):
    req = urllib.request.Request(
        base + path,
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read() or b"null")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"null")


def _answer_once(base, participant, choice="left"):
    status, trial = _get(base, f"/api/trial?participant={participant}")
    assert status == 200
    status, payload = _post(
        base,
        "/api/response",
        {"trial_id": trial["trial_id"], "participant": participant, "choice": choice},
    )
    assert status == 200, payload
    return trial


# ----------------------------------------------------------- happy path


def test_full_participant_flow(server):
    base, service, tmp = server
    seen = set()
    for _ in range(12):  # 2 figures x C(3,2) = 6 pairs per participant
        status, trial = _get(base, "/api/trial?participant=p1")
        if status == 204:
            break
        assert status == 200
        seen.add(trial["trial_id"])
        for key in ("reference_image_url", "left_render_url", "right_render_url"):
            assert trial[key].startswith("/assets/")
        status, _ = _post(
            base,
            "/api/response",
            {"trial_id": trial["trial_id"], "participant": "p1", "choice": "left"},
        )
        assert status == 200
    assert len(seen) == 6
    status, _ = _get(base, "/api/trial?participant=p1")
    assert status == 204  # p1 is done

    status, prog = _get(base, "/api/progress")
    assert status == 200
    assert prog["answered"] == 6

    # everything that was acknowledged is on disk
    assert len(read_log(tmp / "log.ndjson")) == 6


def test_trial_urls_are_opaque_and_served(server):
    base, service, tmp = server
    status, trial = _get(base, "/api/trial?participant=p9")
    assert status == 200
    for key in ("reference_image_url", "left_render_url", "right_render_url"):
        name = trial[key].rsplit("/", 1)[-1]
        for m in METHODS + FIGS:
            assert m not in name  # tokens leak neither method nor figure names
        status, ctype, data = _get_bytes(base, trial[key])
        assert status == 200
        assert ctype == "image/png"
        assert data[:8] == b"\x89PNG\r\n\x1a\n"


def test_reissue_is_idempotent_until_answered(server):
    base, _, _ = server
    status, first = _get(base, "/api/trial?participant=p1")
    status, second = _get(base, "/api/trial?participant=p1")
    assert first == second


def test_timestamps_recorded(server):
    base, _, tmp = server
    _answer_once(base, "p1")
    (resp,) = read_log(tmp / "log.ndjson")
    assert resp.timestamp_ms > 1_600_000_000_000  # epoch millis, not seconds


# ----------------------------------------------------------- error paths


def test_missing_participant_param(server):
    base, _, _ = server
    status, payload = _get(base, "/api/trial")
    assert status == 400
    assert payload["error"] == "BadRequest"


def test_bad_choice(server):
    base, _, _ = server
    status, trial = _get(base, "/api/trial?participant=p1")
    status, payload = _post(
        base,
        "/api/response",
        {"trial_id": trial["trial_id"], "participant": "p1", "choice": "middle"},
    )
    assert status == 400
    assert payload["error"] == "BadChoice"


def test_unknown_trial_404(server):
    base, _, _ = server
    status, payload = _post(
        base,
        "/api/response",
        {"trial_id": "beefbeefbeefbeef", "participant": "p1", "choice": "left"},
    )
    assert status == 404
    assert payload["error"] == "UnknownTrial"


def test_unsolicited_response_409(server, plan):
    base, _, _ = server
    status, payload = _post(
        base,
        "/api/response",
        {"trial_id": plan[0].trial_id, "participant": "p1", "choice": "left"},
    )
    assert status == 409
    assert payload["error"] == "NotOutstanding"


def test_double_submit_409(server):
    base, _, _ = server
    trial = _answer_once(base, "p1")
    status, payload = _post(
        base,
        "/api/response",
        {"trial_id": trial["trial_id"], "participant": "p1", "choice": "right"},
    )
    assert status == 409  # no longer outstanding once answered


def test_malformed_body_400(server):
    base, _, _ = server
    status, payload = _post(base, "/api/response", {"trial_id": "x"})
    assert status == 400
    assert payload["error"] == "BadRequest"


def test_unknown_route_404(server):
    base, _, _ = server
    status, payload = _get(base, "/api/nothing")
    assert status == 404


def test_study_not_loaded_409(tmp_path):
    service = StudyService(None, None)
    httpd = make_server(service, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    try:
        base = f"http://127.0.0.1:{httpd.server_address[1]}"
        for probe in ("/api/trial?participant=p", "/api/progress"):
            status, payload = _get(base, probe)
            assert status == 409
            assert payload["error"] == "StudyNotLoaded"
        status, payload = _post(
            base, "/api/response", {"trial_id": "x", "participant": "p", "choice": "left"}
        )
        assert status == 409
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_asset_traversal_contained(server, tmp_path):
    base, _, _ = server
    secret = tmp_path / "secret.txt"
    secret.write_text("hunter2")
    # basename() collapses the path, so this resolves to a missing asset
    status, payload = _get(base, "/assets/..%2Fsecret.txt")
    assert status == 404


# ------------------------------------------------------------- restart


def test_restart_replays_and_continues(server, plan):
    base, service, tmp = server
    log_path = str(tmp / "log.ndjson")
    for _ in range(4):
        _answer_once(base, "p1")
    # trial issued but not answered: must not survive the restart
    status, dangling = _get(base, "/api/trial?participant=p1")
    assert status == 200

    reborn = StudyService(plan, log_path)
    assert reborn.scheduler.seen == service.scheduler.seen
    assert reborn.scheduler.answered_by_pair == service.scheduler.answered_by_pair
    assert reborn.scheduler.outstanding == {}

    # the participant can finish the study against the new service
    answered = 0
    while (payload := reborn.next_trial("p1")) is not None:
        status, body = reborn.submit(payload["trial_id"], "p1", "right")
        assert status == 200
        answered += 1
    assert answered == 2  # 6 pairs total, 4 already answered


def test_accounting_identity(server):
    base, service, _ = server
    for p in ("p1", "p2", "p3"):
        for _ in range(3):
            _answer_once(base, p)
    status, prog = _get(base, "/api/progress")
    total = sum(int(k) * v for k, v in prog["coverage_histogram"].items())
    assert total == prog["answered"] == 9


def test_serves_ui_bundle(plan, tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<!DOCTYPE html><html><body>study page</body></html>")
    (ui / "main.js").write_text("console.log('ready');\n")
    service = StudyService(plan, str(tmp_path / "log.ndjson"), ui_dir=str(ui))
    httpd = make_server(service, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        status, ctype, body = _get_bytes(base, "/")
        assert status == 200
        assert ctype.startswith("text/html")
        assert b"study page" in body

        status, ctype, body = _get_bytes(base, "/main.js")
        assert status == 200
        assert ctype.startswith("text/javascript")

        # The API namespace takes priority over static files.
        status, _ = _get(base, "/api/progress")
        assert status == 200

        status, _ = _get(base, "/missing.js")
        assert status == 404
    finally:
        httpd.shutdown()
        httpd.server_close()
