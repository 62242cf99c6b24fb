"""HTTP ingestion service for session logs.

POST /api/v1/sessions   validate and persist one session document
GET  /api/v1/manifest   serve the stimulus manifest to the runner
GET  /api/v1/schedule   generate a deterministic schedule (?seed=N)

Persistence is append-only and atomic: the body is written to a
temporary file and hard-linked into place, so a duplicate session id
fails cleanly (409) and a failed request leaves the sessions directory
untouched.  The sessions directory can be overridden with the
MEMSCHEMA_SESSIONS_DIR environment variable.
"""

from __future__ import annotations

import json
import os
import re
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import MemschemaError, SessionLogError
from .manifest import load_manifest
from .schedule import ScheduleConfig, generate_schedule
from .session import parse_session_log

DEFAULT_MAX_BYTES = 10 * 1024 * 1024
_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")


class ServiceConfig:
    def __init__(
        self,
        sessions_dir: str,
        manifest_path: str | None = None,
        token: str | None = None,
        max_bytes: int = DEFAULT_MAX_BYTES,
        strict: bool = False,
        schedule_config: ScheduleConfig | None = None,
    ):
        self.sessions_dir = os.environ.get("MEMSCHEMA_SESSIONS_DIR", sessions_dir)
        self.manifest_path = manifest_path
        self.token = token
        self.max_bytes = max_bytes
        self.strict = strict
        self.schedule_config = schedule_config


def _store_session(config: ServiceConfig, session_id: str, body: bytes) -> None:
    os.makedirs(config.sessions_dir, exist_ok=True)
    final = os.path.join(config.sessions_dir, f"{session_id}.jsonl")
    tmp = os.path.join(config.sessions_dir, f".tmp-{uuid.uuid4().hex}")
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.flush()
        os.fsync(fh.fileno())
    try:
        os.link(tmp, final)
    except FileExistsError:
        raise FileExistsError(session_id)
    finally:
        os.unlink(tmp)


class SessionHandler(BaseHTTPRequestHandler):
    server_version = "memschema"
    config: ServiceConfig  # set by make_server

    def log_message(self, fmt, *args):  # keep tests quiet
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _authorized(self) -> bool:
        if self.config.token is None:
            return True
        return self.headers.get("X-Auth-Token") == self.config.token

    def do_GET(self):
        if not self._authorized():
            self._send(401, {"error": "bad or missing token"})
            return
        path, _, query = self.path.partition("?")
        if path == "/api/v1/manifest":
            if not self.config.manifest_path or not os.path.exists(self.config.manifest_path):
                self._send(404, {"error": "no manifest configured"})
                return
            with open(self.config.manifest_path, "rb") as fh:
                body = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        if path == "/api/v1/schedule":
            if not self.config.manifest_path:
                self._send(404, {"error": "no manifest configured"})
                return
            params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
            try:
                seed = int(params.get("seed", "0"))
                manifest = load_manifest(self.config.manifest_path)
                schedule = generate_schedule(manifest, seed, self.config.schedule_config)
            except (MemschemaError, ValueError) as exc:
                self._send(422, {"error": str(exc)})
                return
            self._send(200, schedule.to_json_dict())
            return
        self._send(404, {"error": f"unknown path {path}"})

    def do_POST(self):
        if not self._authorized():
            self._send(401, {"error": "bad or missing token"})
            return
        if self.path.partition("?")[0] != "/api/v1/sessions":
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        length = int(self.headers.get("Content-Length", 0))
        if length > self.config.max_bytes:
            self._send(413, {"error": f"body exceeds {self.config.max_bytes} bytes"})
            return
        body = self.rfile.read(length)
        try:
            log = parse_session_log(body, strict=self.config.strict)
        except SessionLogError as exc:
            self._send(422, {"error": "validation failed", "detail": str(exc),
                             "line": exc.line, "trial": exc.trial})
            return
        if not _SESSION_ID_RE.match(log.session_id):
            self._send(422, {"error": "validation failed",
                             "detail": f"unsafe session_id {log.session_id!r}"})
            return
        try:
            _store_session(self.config, log.session_id, body)
        except FileExistsError:
            self._send(409, {"error": f"session {log.session_id!r} already ingested"})
            return
        self._send(201, {"session_id": log.session_id})


def make_server(host: str, port: int, config: ServiceConfig) -> ThreadingHTTPServer:
    handler = type("ConfiguredHandler", (SessionHandler,), {"config": config})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(host: str, port: int, config: ServiceConfig) -> None:
    server = make_server(host, port, config)
    print(f"listening on http://{host}:{port}, sessions -> {config.sessions_dir}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
