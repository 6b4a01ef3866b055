"""HTTP serving for the three adapter roles.

One server instance serves one role (mirroring one-process-per-model
deployments); requests are serialized per role with a lock, standing in
for the GPU work queue. Replies follow the wire contract: 2xx JSON
bodies, non-2xx with {"error": "..."}.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import wire
from .grounder import GrounderAdapter
from .segmenter import SegmenterAdapter
from .tracker import TrackerAdapter

ROLES = ("grounder", "segmenter", "tracker")


class AdapterServer:
    def __init__(self, role: str, adapter, host: str = "127.0.0.1", port: int = 0):
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}: {role!r}")
        self.role = role
        self.adapter = adapter
        self._work_lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_POST(self):
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    doc = json.loads(self.rfile.read(length).decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    self._reply(400, {"error": "body is not valid JSON"})
                    return
                try:
                    with outer._work_lock:
                        body = outer._dispatch(self.path, doc)
                except wire.WireError as e:
                    self._reply(400, {"error": str(e)})
                except wire.AdapterError as e:
                    self._reply(409, {"error": str(e)})
                except KeyError:
                    self._reply(404, {"error": f"no such route: {self.path}"})
                except Exception as e:  # pragma: no cover - defensive
                    self._reply(500, {"error": f"internal error: {e}"})
                else:
                    self._reply(200, body)

            def _reply(self, status: int, doc: dict):
                payload = json.dumps(doc, separators=(",", ":")).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def _dispatch(self, path: str, doc: dict) -> dict:
        if path == "/ground" and self.role == "grounder":
            assert isinstance(self.adapter, GrounderAdapter)
            query, prompt, frames = wire.parse_ground_request(doc)
            return self.adapter.ground(query, prompt, frames)
        if path == "/segment" and self.role == "segmenter":
            assert isinstance(self.adapter, SegmenterAdapter)
            return self.adapter.segment(wire.parse_segment_request(doc))
        if path == "/track/init" and self.role == "tracker":
            assert isinstance(self.adapter, TrackerAdapter)
            t, image, mask, direction = wire.parse_track_init_request(doc)
            return {"session": self.adapter.init(t, image, mask, direction)}
        if path == "/track/step" and self.role == "tracker":
            assert isinstance(self.adapter, TrackerAdapter)
            session, t, image = wire.parse_track_step_request(doc)
            return {"t": t, "mask_b64": wire.encode_mask(self.adapter.step(session, t, image))}
        raise KeyError(path)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "AdapterServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self):
        self._server.serve_forever()

    def __enter__(self) -> "AdapterServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()
