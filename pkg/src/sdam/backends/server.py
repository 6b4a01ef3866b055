"""Loopback HTTP server exposing the stub backends over the wire schema.

Exists so the remote code path is testable end to end without any real
model: a pipeline run against this server must produce byte-identical
masks to an in-process stub run.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import ProtocolError, SchemaError
from . import schema
from .stubs import StubGrounder, StubSegmenter, StubTracker


class StubBackendServer:
    """Serves /ground, /segment, /track/init, /track/step over HTTP."""

    def __init__(
        self,
        grounder: StubGrounder,
        segmenter: StubSegmenter,
        tracker: StubTracker,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.grounder = grounder
        self.segmenter = segmenter
        self.tracker = tracker
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # keep test output quiet
                pass

            def do_POST(self):
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    doc = json.loads(self.rfile.read(length).decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    self._reply(400, schema.build_error_response("body is not valid JSON"))
                    return
                try:
                    body = outer._dispatch(self.path, doc)
                except SchemaError as e:
                    self._reply(400, schema.build_error_response(str(e)))
                except ProtocolError as e:
                    self._reply(409, schema.build_error_response(str(e)))
                except KeyError:
                    self._reply(404, schema.build_error_response(f"no such route: {self.path}"))
                except Exception as e:  # pragma: no cover - defensive
                    self._reply(500, schema.build_error_response(f"internal error: {e}"))
                else:
                    self._reply(200, body)

            def _reply(self, status: int, doc: dict):
                payload = schema.canonical_dumps(doc).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def _dispatch(self, path: str, doc: dict) -> dict:
        if path == "/ground":
            query, prompt, frames = schema.parse_ground_request(doc)
            return schema.build_ground_response(self.grounder.ground(frames, query, prompt))
        if path == "/segment":
            parsed = schema.parse_segment_request(doc)
            frames = [(t, image) for t, image, _boxes in parsed]
            grounding = schema.GroundingResult(
                tuple(
                    schema.GroundedFrame(
                        t,
                        tuple(
                            schema.GroundedObject(oid, "", box, True) for oid, box in boxes
                        ),
                        1.0,
                        "",
                    )
                    for t, _image, boxes in parsed
                )
            )
            return schema.build_segment_response(self.segmenter.segment(frames, grounding))
        if path == "/track/init":
            t, image, mask, direction = schema.parse_track_init_request(doc)
            session = self.tracker.init(t, image, mask, direction)
            return schema.build_track_init_response(session.session_id)
        if path == "/track/step":
            session_id, t, image = schema.parse_track_step_request(doc)
            return schema.build_track_step_response(t, self.tracker.step(session_id, t, image))
        raise KeyError(path)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubBackendServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "StubBackendServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()
