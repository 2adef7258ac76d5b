"""HTTP front end for running a forced-choice study.

The service owns a trial plan, a response log and a directory of
pre-rendered assets.  Participants fetch trials, view two renders next
to a reference image, and post back which render they preferred.
Asset URLs use opaque tokens so the client never learns which method
produced which render.  Every accepted response is fsynced to the
NDJSON log before the 200 goes out; restarting the service replays the
log and carries on (trials that were issued but never answered are
simply reissued).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .study import (
    PlannedTrial,
    Scheduler,
    TrialResponse,
    append_response,
    load_plan,
    read_log,
)

__all__ = [
    "StudyService",
    "make_server",
    "asset_token",
    "reference_token",
]


def asset_token(figure_id: str, method_id: str) -> str:
    """Opaque, stable name for one method's render of one figure."""
    digest = hashlib.sha1(f"render|{figure_id}|{method_id}".encode("utf-8"))
    return digest.hexdigest()[:16]


def reference_token(figure_id: str) -> str:
    digest = hashlib.sha1(f"reference|{figure_id}".encode("utf-8"))
    return digest.hexdigest()[:16]


class StudyService:
    """Scheduler plus persistence, shared by all request threads."""

    def __init__(
        self,
        plan: list[PlannedTrial] | None,
        log_path: str | None,
        assets_dir: str | None = None,
        ui_dir: str | None = None,
    ):
        self.lock = threading.Lock()
        self.log_path = log_path
        self.assets_dir = assets_dir
        self.ui_dir = ui_dir
        self.scheduler: Scheduler | None = None
        if plan:
            self.scheduler = Scheduler(plan)
            if log_path and os.path.exists(log_path):
                self.scheduler.replay(read_log(log_path))

    @classmethod
    def from_paths(cls, plan_path, log_path, assets_dir=None, ui_dir=None):
        return cls(load_plan(plan_path), log_path, assets_dir, ui_dir)

    # -- API operations, all under the lock --------------------------------

    def next_trial(self, participant_id: str) -> dict | None:
        with self.lock:
            issued = self.scheduler.next_trial(participant_id)
            if issued is None:
                return None
            return {
                "trial_id": issued.trial_id,
                "reference_image_url": f"/assets/{reference_token(issued.figure_id)}.png",
                "left_render_url": f"/assets/{asset_token(issued.figure_id, issued.left_method)}.png",
                "right_render_url": f"/assets/{asset_token(issued.figure_id, issued.right_method)}.png",
            }

    def submit(self, trial_id: str, participant_id: str, choice: str) -> tuple[int, dict]:
        """Returns (http status, payload)."""
        if choice not in ("left", "right"):
            return HTTPStatus.BAD_REQUEST, {
                "error": "BadChoice",
                "message": f"choice must be 'left' or 'right', got {choice!r}",
            }
        with self.lock:
            if trial_id not in self.scheduler.by_trial_id:
                return HTTPStatus.NOT_FOUND, {
                    "error": "UnknownTrial",
                    "message": f"trial {trial_id!r} is not in the plan",
                }
            if not self.scheduler.is_outstanding(participant_id, trial_id):
                return HTTPStatus.CONFLICT, {
                    "error": "NotOutstanding",
                    "message": f"trial {trial_id!r} is not outstanding for this participant",
                }
            issued = self.scheduler.outstanding[participant_id]
            resp = TrialResponse(
                trial_id=trial_id,
                participant_id=participant_id,
                left_method=issued.left_method,
                right_method=issued.right_method,
                choice=choice,
                timestamp_ms=int(time.time() * 1000),
            )
            # Durability before acknowledgement: the log line hits disk
            # first, then the in-memory counts move.
            if self.log_path:
                append_response(self.log_path, resp)
            self.scheduler.record(resp)
        return HTTPStatus.OK, {"status": "ok"}

    def progress(self) -> dict:
        with self.lock:
            return self.scheduler.progress()


class _Handler(BaseHTTPRequestHandler):
    service: StudyService  # assigned by make_server

    # -- helpers ----------------------------------------------------------

    def _send_json(self, status: int, payload: dict | None) -> None:
        body = b"" if payload is None else json.dumps(payload).encode("utf-8")
        self.send_response(int(status))
        if body:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _send_file(self, directory: str, name: str, content_type: str) -> None:
        safe = os.path.basename(name)
        path = os.path.join(directory, safe)
        if not os.path.isfile(path):
            self._send_json(HTTPStatus.NOT_FOUND, {"error": "NotFound", "message": safe})
            return
        with open(path, "rb") as fh:
            data = fh.read()
        self.send_response(int(HTTPStatus.OK))
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _study_loaded(self) -> bool:
        if self.service.scheduler is None:
            self._send_json(
                HTTPStatus.CONFLICT,
                {"error": "StudyNotLoaded", "message": "no plan has been loaded"},
            )
            return False
        return True

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- routing ------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/trial":
            if not self._study_loaded():
                return
            params = parse_qs(url.query)
            participant = (params.get("participant") or [""])[0]
            if not participant:
                self._send_json(
                    HTTPStatus.BAD_REQUEST,
                    {"error": "BadRequest", "message": "participant is required"},
                )
                return
            payload = self.service.next_trial(participant)
            if payload is None:
                self._send_json(HTTPStatus.NO_CONTENT, None)
            else:
                self._send_json(HTTPStatus.OK, payload)
            return
        if url.path == "/api/progress":
            if not self._study_loaded():
                return
            self._send_json(HTTPStatus.OK, self.service.progress())
            return
        if url.path.startswith("/assets/"):
            if not self.service.assets_dir:
                self._send_json(
                    HTTPStatus.NOT_FOUND,
                    {"error": "NotFound", "message": "no assets directory configured"},
                )
                return
            self._send_file(self.service.assets_dir, url.path[len("/assets/"):], "image/png")
            return
        if self.service.ui_dir:
            name = url.path.lstrip("/") or "index.html"
            content_type = {
                ".html": "text/html; charset=utf-8",
                ".js": "text/javascript; charset=utf-8",
                ".css": "text/css; charset=utf-8",
                ".map": "application/json",
            }.get(os.path.splitext(name)[1], "application/octet-stream")
            self._send_file(self.service.ui_dir, name, content_type)
            return
        self._send_json(HTTPStatus.NOT_FOUND, {"error": "NotFound", "message": url.path})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/api/response":
            self._send_json(HTTPStatus.NOT_FOUND, {"error": "NotFound", "message": url.path})
            return
        if not self._study_loaded():
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            trial_id = str(body["trial_id"])
            participant = str(body["participant"])
            choice = str(body["choice"])
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            self._send_json(
                HTTPStatus.BAD_REQUEST,
                {"error": "BadRequest", "message": f"malformed body: {exc}"},
            )
            return
        status, payload = self.service.submit(trial_id, participant, choice)
        self._send_json(status, payload)


def make_server(service: StudyService, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind a threading HTTP server; port 0 picks a free port."""
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)
