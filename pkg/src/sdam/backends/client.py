"""HTTP clients for remote perception backends.

A remote backend satisfying the wire schema is interchangeable with the
in-process stubs; the pipeline only depends on the ground/segment/
init/step call signatures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .errors import SchemaError, TransportError
from . import schema
from .schema import (
    GroundingResult,
    SegmentationResult,
    TrackerSession,
)


@dataclass(frozen=True)
class EndpointSpec:
    mode: str = "stub"  # "stub" | "remote"
    url: str | None = None

    def __post_init__(self):
        if self.mode not in ("stub", "remote"):
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode == "remote" and not self.url:
            raise ValueError("remote mode requires a url")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "url": self.url}

    @classmethod
    def from_dict(cls, doc: dict) -> "EndpointSpec":
        return cls(mode=doc.get("mode", "stub"), url=doc.get("url"))


@dataclass(frozen=True)
class BackendEndpointConfig:
    grounder: EndpointSpec = field(default_factory=EndpointSpec)
    segmenter: EndpointSpec = field(default_factory=EndpointSpec)
    tracker: EndpointSpec = field(default_factory=EndpointSpec)
    timeout_s: float = 30.0
    retries: int = 2
    prefer_path: bool = False  # send image_path instead of image_b64 when known

    def to_dict(self) -> dict:
        return {
            "grounder": self.grounder.to_dict(),
            "segmenter": self.segmenter.to_dict(),
            "tracker": self.tracker.to_dict(),
            "timeout_s": self.timeout_s,
            "retries": self.retries,
            "prefer_path": self.prefer_path,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BackendEndpointConfig":
        return cls(
            grounder=EndpointSpec.from_dict(doc.get("grounder", {})),
            segmenter=EndpointSpec.from_dict(doc.get("segmenter", {})),
            tracker=EndpointSpec.from_dict(doc.get("tracker", {})),
            timeout_s=doc.get("timeout_s", 30.0),
            retries=doc.get("retries", 2),
            prefer_path=doc.get("prefer_path", False),
        )

    @property
    def all_stub(self) -> bool:
        return all(e.mode == "stub" for e in (self.grounder, self.segmenter, self.tracker))


class _HttpBase:
    def __init__(self, base_url: str, timeout_s: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self._session = requests.Session()

    def _post(self, path: str, doc: dict) -> dict:
        url = f"{self.base_url}{path}"
        payload = schema.canonical_dumps(doc).encode("utf-8")
        last_error: Exception | None = None
        for _attempt in range(self.retries + 1):
            try:
                resp = self._session.post(
                    url,
                    data=payload,
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout_s,
                )
            except (requests.ConnectionError, requests.Timeout) as e:
                last_error = e
                continue
            if resp.status_code // 100 != 2:
                try:
                    message = resp.json().get("error", resp.text)
                except ValueError:
                    message = resp.text
                raise TransportError(f"{url} -> {resp.status_code}: {message}")
            try:
                return resp.json()
            except ValueError as e:
                raise SchemaError(f"{url} returned non-JSON body") from e
        raise TransportError(f"{url} unreachable after {self.retries + 1} attempts: {last_error}")


class HttpGrounder(_HttpBase):
    def __init__(self, base_url, timeout_s=30.0, retries=2, frame_paths=None):
        super().__init__(base_url, timeout_s, retries)
        self.frame_paths: dict[int, str | Path] = frame_paths or {}

    def ground(self, frames, query: str, prompt: str) -> GroundingResult:
        doc = schema.build_ground_request(frames, query, prompt, self.frame_paths)
        return schema.parse_ground_response(self._post("/ground", doc))


class HttpSegmenter(_HttpBase):
    def __init__(self, base_url, timeout_s=30.0, retries=2, frame_paths=None):
        super().__init__(base_url, timeout_s, retries)
        self.frame_paths: dict[int, str | Path] = frame_paths or {}

    def segment(self, frames, grounding: GroundingResult) -> SegmentationResult:
        requested = sorted(t for t, _ in frames)
        grounded = sorted(f.t for f in grounding.frames)
        if requested != grounded:
            raise SchemaError(f"grounding covers frames {grounded}, requested {requested}")
        boxes = {
            f.t: [(o.object_id, o.box) for o in f.objects if o.present and o.box]
            for f in grounding.frames
        }
        doc = schema.build_segment_request(frames, boxes, self.frame_paths)
        return schema.parse_segment_response(self._post("/segment", doc))


class HttpTracker(_HttpBase):
    def __init__(self, base_url, timeout_s=30.0, retries=2, frame_paths=None):
        super().__init__(base_url, timeout_s, retries)
        self.frame_paths: dict[int, str | Path] = frame_paths or {}

    def init(self, t: int, image: np.ndarray, mask: np.ndarray, direction: str) -> TrackerSession:
        doc = schema.build_track_init_request(
            t, image, mask, direction, self.frame_paths.get(t)
        )
        session_id = schema.parse_track_init_response(self._post("/track/init", doc))
        return TrackerSession(session_id, direction, t)

    def step(self, session: TrackerSession, t: int, image: np.ndarray) -> np.ndarray:
        session_id = session.session_id if isinstance(session, TrackerSession) else session
        doc = schema.build_track_step_request(session_id, t, image, self.frame_paths.get(t))
        rt, mask = schema.parse_track_step_response(self._post("/track/step", doc))
        if rt != t:
            raise SchemaError(f"track/step returned frame {rt}, expected {t}")
        return mask


def build_backends(
    cfg: BackendEndpointConfig,
    stub_factory=None,
    frame_paths: dict[int, str | Path] | None = None,
):
    """Materialize (grounder, segmenter, tracker) per the endpoint config.

    stub_factory() supplies the in-process trio for roles in stub mode;
    remote roles get HTTP clients. Mixed configurations are fine.
    """
    stubs = None
    paths = frame_paths if cfg.prefer_path else None

    def _stub(index: int):
        nonlocal stubs
        if stubs is None:
            if stub_factory is None:
                raise ValueError("stub mode requires a stub factory (annotations)")
            stubs = stub_factory()
        return stubs[index]

    kwargs = {"timeout_s": cfg.timeout_s, "retries": cfg.retries, "frame_paths": paths}
    grounder = (
        HttpGrounder(cfg.grounder.url, **kwargs) if cfg.grounder.mode == "remote" else _stub(0)
    )
    segmenter = (
        HttpSegmenter(cfg.segmenter.url, **kwargs) if cfg.segmenter.mode == "remote" else _stub(1)
    )
    tracker = (
        HttpTracker(cfg.tracker.url, **kwargs) if cfg.tracker.mode == "remote" else _stub(2)
    )
    return grounder, segmenter, tracker
