"""Tracker role: stateful mask-propagation sessions.

One memory state per session id, strictly sequential stepping in the
session's direction ("forward" walks toward frame 1, "backward" toward
frame T). The classical engine is per-object template matching by color
SSD inside a local search window; an object whose best match is poor is
emitted empty for that frame but can be reacquired later.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .wire import AdapterError

SEARCH_RADIUS = 8
MATCH_THRESHOLD = 900.0  # mean squared per-channel color distance
MIN_OVERLAP = 0.25


@dataclass
class _TrackedObject:
    template: np.ndarray  # (th, tw, 3) RGB crop at init
    support: np.ndarray  # (th, tw) bool: the object's own pixels
    y: int
    x: int


@dataclass
class _Session:
    direction: str
    last_t: int
    objects: dict[int, _TrackedObject]
    lock: threading.Lock = field(default_factory=threading.Lock)


class TemplateTrackerEngine:
    """Deterministic SSD template matcher over a local shift window."""

    def __init__(self, radius: int = SEARCH_RADIUS, threshold: float = MATCH_THRESHOLD):
        self.radius = radius
        self.threshold = threshold

    def init_objects(self, image: np.ndarray, mask: np.ndarray) -> dict[int, _TrackedObject]:
        objects = {}
        for oid in (int(k) for k in np.unique(mask) if k != 0):
            layer = mask == oid
            ys, xs = np.nonzero(layer)
            y1, y2 = int(ys.min()), int(ys.max()) + 1
            x1, x2 = int(xs.min()), int(xs.max()) + 1
            objects[oid] = _TrackedObject(
                template=image[y1:y2, x1:x2].copy(),
                support=layer[y1:y2, x1:x2].copy(),
                y=y1,
                x=x1,
            )
        return objects

    def locate(self, obj: _TrackedObject, image: np.ndarray) -> tuple[int, int] | None:
        h, w = image.shape[:2]
        th, tw = obj.support.shape
        support_size = int(obj.support.sum())
        best_key = None
        best_pos = None
        img = image.astype(np.int64)
        tmpl = obj.template.astype(np.int64)
        for dy in range(-self.radius, self.radius + 1):
            for dx in range(-self.radius, self.radius + 1):
                y, x = obj.y + dy, obj.x + dx
                sy1, sy2 = max(0, -y), min(th, h - y)
                sx1, sx2 = max(0, -x), min(tw, w - x)
                if sy1 >= sy2 or sx1 >= sx2:
                    continue
                sub_support = obj.support[sy1:sy2, sx1:sx2]
                n = int(sub_support.sum())
                if n < MIN_OVERLAP * support_size or n == 0:
                    continue
                window = img[y + sy1 : y + sy2, x + sx1 : x + sx2]
                diff = window - tmpl[sy1:sy2, sx1:sx2]
                ssd = float((diff * diff).sum(axis=2)[sub_support].mean())
                key = (ssd, abs(dx) + abs(dy), dy, dx)
                if best_key is None or key < best_key:
                    best_key = key
                    best_pos = (y, x)
        if best_key is None or best_key[0] > self.threshold:
            return None
        return best_pos


class TrackerAdapter:
    def __init__(self, engine: TemplateTrackerEngine | None = None):
        self.engine = engine or TemplateTrackerEngine()
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def init(self, t: int, image: np.ndarray, mask: np.ndarray, direction: str) -> str:
        objects = self.engine.init_objects(image, mask)
        if not objects:
            raise AdapterError("no objects to memorize: mask is all background")
        session_id = uuid.uuid4().hex
        with self._lock:
            self._sessions[session_id] = _Session(direction, t, objects)
        return session_id

    def step(self, session_id: str, t: int, image: np.ndarray) -> np.ndarray:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise AdapterError(f"unknown session: {session_id}")
        with session.lock:
            expected = session.last_t + (1 if session.direction == "backward" else -1)
            if t != expected:
                raise AdapterError(
                    f"out-of-order step: session at {session.last_t} "
                    f"({session.direction}), expected {expected}, got {t}"
                )
            h, w = image.shape[:2]
            mask = np.zeros((h, w), dtype=np.uint8)
            for oid in sorted(session.objects):
                obj = session.objects[oid]
                pos = self.engine.locate(obj, image)
                if pos is None:
                    continue  # lost this frame; state retained for reacquisition
                obj.y, obj.x = pos
                th, tw = obj.support.shape
                sy1, sy2 = max(0, -pos[0]), min(th, h - pos[0])
                sx1, sx2 = max(0, -pos[1]), min(tw, w - pos[1])
                region = mask[pos[0] + sy1 : pos[0] + sy2, pos[1] + sx1 : pos[1] + sx2]
                region[obj.support[sy1:sy2, sx1:sx2]] = oid
            session.last_t = t
            return mask


def build_tracker(model_id: str = "classical", device: str = "cpu") -> TrackerAdapter:
    if model_id != "classical":
        raise AdapterError(
            f"no memory-tracker checkpoint support wired yet: {model_id!r}; "
            "use 'classical'"
        )
    return TrackerAdapter()
